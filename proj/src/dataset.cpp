#include "qtrain/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "qtrain/errors.hpp"
#include "qtrain/rng.hpp"

namespace qtrain {

namespace {

std::vector<unsigned char> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open " + path);
    in.seekg(0, std::ios::end);
    const auto size = in.tellg();
    in.seekg(0, std::ios::beg);
    std::vector<unsigned char> bytes(static_cast<std::size_t>(size));
    if (size > 0)
        in.read(reinterpret_cast<char*>(bytes.data()), size);
    if (!in)
        throw DataError("read failed for " + path);
    return bytes;
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset,
                        const std::string& path) {
    if (offset + 4 > bytes.size())
        throw DataError(path + ": truncated at offset " + std::to_string(offset) +
                        " (expected 4 more bytes)");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::string hex32(std::uint32_t v) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "0x%08x", v);
    return buf;
}

} // namespace

Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path) {
    constexpr std::uint32_t kImagesMagic = 0x00000803;
    constexpr std::uint32_t kLabelsMagic = 0x00000801;

    const auto img_bytes = read_file(images_path);
    const std::uint32_t img_magic = read_be32(img_bytes, 0, images_path);
    if (img_magic != kImagesMagic)
        throw DataError(images_path + ": bad magic " + hex32(img_magic) + " at offset 0 (expected " +
                        hex32(kImagesMagic) + ")");
    const std::uint32_t count = read_be32(img_bytes, 4, images_path);
    const std::uint32_t rows = read_be32(img_bytes, 8, images_path);
    const std::uint32_t cols = read_be32(img_bytes, 12, images_path);
    const std::size_t expected = 16 + std::size_t{count} * rows * cols;
    if (img_bytes.size() != expected)
        throw DataError(images_path + ": payload is " + std::to_string(img_bytes.size()) +
                        " bytes, expected " + std::to_string(expected) + " (truncated at offset " +
                        std::to_string(img_bytes.size()) + ")");

    const auto lbl_bytes = read_file(labels_path);
    const std::uint32_t lbl_magic = read_be32(lbl_bytes, 0, labels_path);
    if (lbl_magic != kLabelsMagic)
        throw DataError(labels_path + ": bad magic " + hex32(lbl_magic) + " at offset 0 (expected " +
                        hex32(kLabelsMagic) + ")");
    const std::uint32_t lbl_count = read_be32(lbl_bytes, 4, labels_path);
    if (lbl_bytes.size() != 8 + std::size_t{lbl_count})
        throw DataError(labels_path + ": payload is " + std::to_string(lbl_bytes.size()) +
                        " bytes, expected " + std::to_string(8 + std::size_t{lbl_count}) +
                        " (truncated at offset " + std::to_string(lbl_bytes.size()) + ")");
    if (lbl_count != count)
        throw DataError("count mismatch: " + images_path + " has " + std::to_string(count) +
                        " images but " + labels_path + " has " + std::to_string(lbl_count) +
                        " labels");

    Dataset data;
    data.channels = 1;
    data.height = static_cast<int>(rows);
    data.width = static_cast<int>(cols);
    data.class_count = 10;
    data.images.resize(std::size_t{count} * rows * cols);
    for (std::size_t i = 0; i < data.images.size(); ++i)
        data.images[i] = static_cast<float>(img_bytes[16 + i]) / 255.0f;
    data.labels.resize(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const unsigned char label = lbl_bytes[8 + i];
        if (label > 9)
            throw DataError(labels_path + ": label " + std::to_string(label) + " at offset " +
                            std::to_string(8 + i) + " outside [0, 9]");
        data.labels[i] = label;
    }
    return data;
}

Dataset load_cifar10_binary(const std::vector<std::string>& record_files) {
    constexpr std::size_t kRecord = 3073; // 1 label byte + 3 x 32 x 32 pixels
    if (record_files.empty())
        throw DataError("cifar10: no batch files given");

    Dataset data;
    data.channels = 3;
    data.height = 32;
    data.width = 32;
    data.class_count = 10;
    for (const auto& path : record_files) {
        const auto bytes = read_file(path);
        if (bytes.empty() || bytes.size() % kRecord != 0)
            throw DataError(path + ": size " + std::to_string(bytes.size()) +
                            " is not a multiple of the 3073-byte record");
        const std::size_t records = bytes.size() / kRecord;
        for (std::size_t rec = 0; rec < records; ++rec) {
            const std::size_t base = rec * kRecord;
            const unsigned char label = bytes[base];
            if (label > 9)
                throw DataError(path + ": label " + std::to_string(label) + " at offset " +
                                std::to_string(base) + " outside [0, 9]");
            data.labels.push_back(label);
            for (std::size_t px = 0; px < kRecord - 1; ++px)
                data.images.push_back(static_cast<float>(bytes[base + 1 + px]) / 255.0f);
        }
    }
    return data;
}

Dataset subset(const Dataset& data, const std::vector<int>& classes,
               std::optional<std::size_t> per_class_cap) {
    if (classes.empty())
        throw DomainError("subset: class list is empty");
    std::vector<int> sorted(classes);
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (int c : sorted)
        if (c < 0 || c >= data.class_count)
            throw DomainError("subset: unknown class id " + std::to_string(c));

    std::vector<int> relabel(static_cast<std::size_t>(data.class_count), -1);
    for (std::size_t k = 0; k < sorted.size(); ++k)
        relabel[static_cast<std::size_t>(sorted[k])] = static_cast<int>(k);

    Dataset out;
    out.channels = data.channels;
    out.height = data.height;
    out.width = data.width;
    out.class_count = static_cast<int>(sorted.size());
    out.split = data.split;
    const std::size_t per = static_cast<std::size_t>(data.channels) * data.height * data.width;
    std::vector<std::size_t> taken(sorted.size(), 0);
    for (std::size_t i = 0; i < data.count(); ++i) {
        const int mapped = relabel[static_cast<std::size_t>(data.labels[i])];
        if (mapped < 0)
            continue;
        if (per_class_cap && taken[static_cast<std::size_t>(mapped)] >= *per_class_cap)
            continue;
        ++taken[static_cast<std::size_t>(mapped)];
        out.labels.push_back(mapped);
        out.images.insert(out.images.end(), data.images.begin() + static_cast<std::ptrdiff_t>(i * per),
                          data.images.begin() + static_cast<std::ptrdiff_t>((i + 1) * per));
    }
    return out;
}

std::vector<std::vector<int>> batches(const Dataset& data, int batch_size, std::uint64_t seed,
                                      int epoch) {
    if (batch_size < 1)
        throw ConfigError("batches: batch_size must be >= 1");
    std::vector<int> order(data.count());
    std::iota(order.begin(), order.end(), 0);
    Rng rng(Rng::mix(seed, 0x65706f6368ULL + static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);

    std::vector<std::vector<int>> out;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch_size));
        out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return out;
}

Batch make_batch(const Dataset& data, std::span<const int> indices) {
    Batch batch;
    batch.count = static_cast<int>(indices.size());
    batch.input_shape = {data.channels, data.height, data.width};
    const std::size_t per = static_cast<std::size_t>(data.channels) * data.height * data.width;
    batch.inputs.reserve(per * indices.size());
    batch.labels.reserve(indices.size());
    for (int idx : indices) {
        if (idx < 0 || static_cast<std::size_t>(idx) >= data.count())
            throw DomainError("make_batch: index out of range");
        const float* src = data.images.data() + per * static_cast<std::size_t>(idx);
        for (std::size_t j = 0; j < per; ++j)
            batch.inputs.push_back(static_cast<double>(src[j]));
        batch.labels.push_back(data.labels[static_cast<std::size_t>(idx)]);
    }
    return batch;
}

} // namespace qtrain
