#include "qtrain/checkpoint.hpp"

#include <cstring>
#include <filesystem>
#include <fstream>

#include <zlib.h>

#include "qtrain/errors.hpp"

namespace qtrain {

namespace {

constexpr char kMagic[8] = {'Q', 'T', 'C', 'K', 'P', 'T', '0', '1'};
constexpr int kVersion = 1;

struct ArrayRef {
    std::string name;
    std::vector<int> shape;
    double* data;
    std::size_t size;
};

ArrayRef make_ref(std::string name, std::vector<int> shape, std::vector<double>& values) {
    std::size_t size = 1;
    for (int d : shape)
        size *= static_cast<std::size_t>(d);
    if (size != values.size())
        throw CheckpointError("array " + name + " has " + std::to_string(values.size()) +
                              " entries, shape wants " + std::to_string(size));
    return {std::move(name), std::move(shape), values.data(), size};
}

std::vector<ArrayRef> state_arrays(TrainState& state) {
    std::vector<ArrayRef> arrays;
    for (std::size_t j = 0; j < state.theta.per_split.size(); ++j)
        arrays.push_back(make_ref("theta." + std::to_string(j),
                                  {state.circuit.layers, state.circuit.splits[j]},
                                  state.theta.per_split[j]));
    if (auto* mps = std::get_if<MpsMapping>(&state.mapping)) {
        const int r = mps->bond_dim;
        arrays.push_back(make_ref("mps.first", {2, r}, mps->first));
        for (std::size_t k = 0; k < mps->middle.size(); ++k)
            arrays.push_back(make_ref("mps.middle." + std::to_string(k), {r, 2, r}, mps->middle[k]));
        arrays.push_back(make_ref("mps.last", {r, 2}, mps->last));
    } else {
        auto& mlp = std::get<MlpMapping>(state.mapping);
        arrays.push_back(make_ref("mlp.w1", {mlp.hidden, mlp.input_dim}, mlp.w1));
        arrays.push_back(make_ref("mlp.b1", {mlp.hidden}, mlp.b1));
        arrays.push_back(make_ref("mlp.w2", {mlp.hidden, mlp.hidden}, mlp.w2));
        arrays.push_back(make_ref("mlp.b2", {mlp.hidden}, mlp.b2));
        arrays.push_back(make_ref("mlp.w3", {1, mlp.hidden}, mlp.w3));
        arrays.push_back(make_ref("mlp.b3", {1}, mlp.b3));
    }
    arrays.push_back(make_ref("adam_theta.m", {static_cast<int>(state.adam_theta.m.size())},
                              state.adam_theta.m));
    arrays.push_back(make_ref("adam_theta.v", {static_cast<int>(state.adam_theta.v.size())},
                              state.adam_theta.v));
    arrays.push_back(make_ref("adam_mapping.m", {static_cast<int>(state.adam_mapping.m.size())},
                              state.adam_mapping.m));
    arrays.push_back(make_ref("adam_mapping.v", {static_cast<int>(state.adam_mapping.v.size())},
                              state.adam_mapping.v));
    return arrays;
}

void append_bytes(std::vector<unsigned char>& out, const void* data, std::size_t len) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    out.insert(out.end(), bytes, bytes + len);
}

std::uint32_t file_crc(const std::vector<unsigned char>& bytes, std::size_t len) {
    return static_cast<std::uint32_t>(
        crc32(0L, reinterpret_cast<const Bytef*>(bytes.data()), static_cast<uInt>(len)));
}

} // namespace

void save_checkpoint(const TrainState& state, const nlohmann::json& config_echo,
                     const std::string& path) {
    auto& mutable_state = const_cast<TrainState&>(state);
    const auto arrays = state_arrays(mutable_state);

    nlohmann::json manifest = nlohmann::json::array();
    for (const auto& a : arrays)
        manifest.push_back({{"name", a.name}, {"shape", a.shape}});
    const nlohmann::json header{{"version", kVersion},
                                {"step", state.step},
                                {"seed", state.seed},
                                {"prob_scale", state.prob_scale},
                                {"config", config_echo},
                                {"arrays", manifest}};
    const std::string header_text = header.dump();

    std::vector<unsigned char> bytes;
    append_bytes(bytes, kMagic, sizeof(kMagic));
    const std::uint64_t header_len = header_text.size();
    append_bytes(bytes, &header_len, sizeof(header_len));
    append_bytes(bytes, header_text.data(), header_text.size());
    for (const auto& a : arrays)
        append_bytes(bytes, a.data, a.size * sizeof(double));
    const std::uint32_t crc = file_crc(bytes, bytes.size());
    append_bytes(bytes, &crc, sizeof(crc));

    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw CheckpointError("cannot write " + tmp);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out)
            throw CheckpointError("write failed for " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw CheckpointError("cannot open " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());

    if (bytes.size() < sizeof(kMagic) + sizeof(std::uint64_t) + sizeof(std::uint32_t))
        throw CheckpointError(path + ": truncated (only " + std::to_string(bytes.size()) +
                              " bytes)");
    if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
        throw CheckpointError(path + ": not a checkpoint (bad magic)");

    const std::uint32_t stored_crc = [&] {
        std::uint32_t v;
        std::memcpy(&v, bytes.data() + bytes.size() - sizeof(v), sizeof(v));
        return v;
    }();
    if (file_crc(bytes, bytes.size() - sizeof(std::uint32_t)) != stored_crc)
        throw CheckpointError(path + ": checksum mismatch (corrupted)");

    std::uint64_t header_len = 0;
    std::memcpy(&header_len, bytes.data() + sizeof(kMagic), sizeof(header_len));
    const std::size_t header_start = sizeof(kMagic) + sizeof(header_len);
    if (header_start + header_len + sizeof(std::uint32_t) > bytes.size())
        throw CheckpointError(path + ": truncated header");
    const nlohmann::json header = nlohmann::json::parse(
        bytes.begin() + static_cast<std::ptrdiff_t>(header_start),
        bytes.begin() + static_cast<std::ptrdiff_t>(header_start + header_len), nullptr,
        /*allow_exceptions=*/false);
    if (header.is_discarded())
        throw CheckpointError(path + ": header is not valid JSON");
    if (!header.contains("version") || header.at("version").get<int>() != kVersion)
        throw CheckpointError(path + ": unsupported checkpoint version");

    LoadedCheckpoint loaded;
    loaded.config_echo = header.at("config");
    const TrainConfig cfg = parse_config_json(loaded.config_echo, path + "#config");
    loaded.state = init_train_state(cfg);
    loaded.state.step = header.at("step").get<long long>();
    loaded.state.seed = header.at("seed").get<std::uint64_t>();
    loaded.state.prob_scale = header.at("prob_scale").get<bool>();

    const auto arrays = state_arrays(loaded.state);
    const auto& manifest = header.at("arrays");
    if (!manifest.is_array() || manifest.size() != arrays.size())
        throw CheckpointError(path + ": array manifest does not match state layout");

    std::size_t offset = header_start + header_len;
    for (std::size_t i = 0; i < arrays.size(); ++i) {
        const auto& entry = manifest[i];
        if (entry.at("name").get<std::string>() != arrays[i].name)
            throw CheckpointError(path + ": array " + std::to_string(i) + " is '" +
                                  entry.at("name").get<std::string>() + "', expected '" +
                                  arrays[i].name + "'");
        const auto shape = entry.at("shape").get<std::vector<int>>();
        if (shape != arrays[i].shape)
            throw CheckpointError(path + ": array " + arrays[i].name + " shape mismatch");
        const std::size_t nbytes = arrays[i].size * sizeof(double);
        if (offset + nbytes + sizeof(std::uint32_t) > bytes.size())
            throw CheckpointError(path + ": truncated at array " + arrays[i].name);
        std::memcpy(arrays[i].data, bytes.data() + offset, nbytes);
        offset += nbytes;
    }
    if (offset + sizeof(std::uint32_t) != bytes.size())
        throw CheckpointError(path + ": trailing bytes after payload");
    return loaded;
}

} // namespace qtrain
