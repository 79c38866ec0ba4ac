#include "qtrain/config.hpp"

#include <fstream>

#include "qtrain/errors.hpp"

namespace qtrain {

using nlohmann::json;

int ceil_log2(std::size_t value) {
    if (value == 0)
        throw DomainError("ceil_log2: value must be positive");
    int n = 0;
    while ((std::size_t{1} << n) < value)
        ++n;
    return n;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& message) {
    throw ConfigError(path + ": " + message);
}

void expect_object(const json& node, const std::string& path) {
    if (!node.is_object())
        fail(path, "expected an object");
}

void check_keys(const json& node, const std::string& path, std::initializer_list<const char*> allowed) {
    for (const auto& [key, value] : node.items()) {
        bool known = false;
        for (const char* a : allowed)
            if (key == a)
                known = true;
        if (!known)
            fail(path + "." + key, "unknown key");
    }
}

long long get_int(const json& node, const std::string& path, long long lo, long long hi) {
    if (!node.is_number_integer())
        fail(path, "expected an integer");
    const long long v = node.get<long long>();
    if (v < lo || v > hi)
        fail(path, "value " + std::to_string(v) + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]");
    return v;
}

double get_number(const json& node, const std::string& path) {
    if (!node.is_number())
        fail(path, "expected a number");
    return node.get<double>();
}

bool get_bool(const json& node, const std::string& path) {
    if (!node.is_boolean())
        fail(path, "expected a boolean");
    return node.get<bool>();
}

std::string get_string(const json& node, const std::string& path) {
    if (!node.is_string())
        fail(path, "expected a string");
    return node.get<std::string>();
}

Activation parse_activation(const json& node, const std::string& path) {
    const std::string s = get_string(node, path);
    if (s == "relu")
        return Activation::Relu;
    if (s == "none")
        return Activation::None;
    fail(path, "unknown activation '" + s + "' (expected relu | none)");
}

DatasetConfig parse_dataset(const json& node) {
    expect_object(node, "dataset");
    check_keys(node, "dataset",
               {"name", "data_dir", "classes", "per_class_cap", "test_per_class_cap"});
    DatasetConfig out;
    if (!node.contains("name"))
        fail("dataset.name", "required");
    out.name = get_string(node.at("name"), "dataset.name");
    if (out.name != "mnist" && out.name != "cifar10")
        fail("dataset.name", "unknown dataset '" + out.name + "' (expected mnist | cifar10)");
    out.data_dir = node.contains("data_dir") ? get_string(node.at("data_dir"), "dataset.data_dir")
                                             : std::string("data");
    if (node.contains("classes")) {
        if (!node.at("classes").is_array() || node.at("classes").empty())
            fail("dataset.classes", "expected a nonempty array of class ids");
        for (std::size_t i = 0; i < node.at("classes").size(); ++i)
            out.classes.push_back(static_cast<int>(
                get_int(node.at("classes")[i], "dataset.classes[" + std::to_string(i) + "]", 0, 9)));
    }
    if (node.contains("per_class_cap"))
        out.per_class_cap = static_cast<std::size_t>(
            get_int(node.at("per_class_cap"), "dataset.per_class_cap", 0, 1'000'000'000));
    if (node.contains("test_per_class_cap"))
        out.test_per_class_cap = static_cast<std::size_t>(get_int(
            node.at("test_per_class_cap"), "dataset.test_per_class_cap", 0, 1'000'000'000));
    return out;
}

TargetNetworkSpec parse_target(const json& node, int class_count) {
    expect_object(node, "target");
    check_keys(node, "target", {"preset", "input", "layers"});
    if (node.contains("preset")) {
        if (node.contains("layers") || node.contains("input"))
            fail("target", "preset excludes explicit input/layers");
        return target_preset(get_string(node.at("preset"), "target.preset"), class_count);
    }
    if (!node.contains("layers") || !node.contains("input"))
        fail("target", "either preset or input + layers required");

    TargetNetworkSpec spec;
    spec.class_count = class_count;
    const json& input = node.at("input");
    if (!input.is_array() || input.size() != 3)
        fail("target.input", "expected [channels, height, width]");
    for (int d = 0; d < 3; ++d)
        spec.input_shape[static_cast<std::size_t>(d)] = static_cast<int>(
            get_int(input[static_cast<std::size_t>(d)], "target.input[" + std::to_string(d) + "]", 1, 4096));

    const json& layers = node.at("layers");
    if (!layers.is_array() || layers.empty())
        fail("target.layers", "expected a nonempty array");
    for (std::size_t i = 0; i < layers.size(); ++i) {
        const std::string path = "target.layers[" + std::to_string(i) + "]";
        const json& layer = layers[i];
        expect_object(layer, path);
        if (!layer.contains("type"))
            fail(path + ".type", "required");
        const std::string type = get_string(layer.at("type"), path + ".type");
        if (type == "dense") {
            check_keys(layer, path, {"type", "in", "out", "act"});
            DenseLayer d;
            d.in = static_cast<int>(get_int(layer.at("in"), path + ".in", 1, 1 << 24));
            d.out = static_cast<int>(get_int(layer.at("out"), path + ".out", 1, 1 << 24));
            d.act = layer.contains("act") ? parse_activation(layer.at("act"), path + ".act")
                                          : Activation::None;
            spec.layers.push_back(d);
        } else if (type == "conv2d") {
            check_keys(layer, path, {"type", "in_ch", "out_ch", "kernel", "stride", "act"});
            Conv2dLayer c;
            c.in_ch = static_cast<int>(get_int(layer.at("in_ch"), path + ".in_ch", 1, 4096));
            c.out_ch = static_cast<int>(get_int(layer.at("out_ch"), path + ".out_ch", 1, 4096));
            c.kernel = static_cast<int>(get_int(layer.at("kernel"), path + ".kernel", 1, 1024));
            c.stride = layer.contains("stride")
                           ? static_cast<int>(get_int(layer.at("stride"), path + ".stride", 1, 1024))
                           : 1;
            c.act = layer.contains("act") ? parse_activation(layer.at("act"), path + ".act")
                                          : Activation::None;
            spec.layers.push_back(c);
        } else if (type == "maxpool") {
            check_keys(layer, path, {"type", "kernel"});
            spec.layers.push_back(
                MaxPool2dLayer{static_cast<int>(get_int(layer.at("kernel"), path + ".kernel", 1, 1024))});
        } else if (type == "flatten") {
            check_keys(layer, path, {"type"});
            spec.layers.push_back(FlattenLayer{});
        } else {
            fail(path + ".type", "unknown layer type '" + type + "'");
        }
    }
    return spec;
}

json target_echo(const json& node) {
    // The target section echoes what was given; defaults live inside presets.
    if (node.contains("preset"))
        return json{{"preset", node.at("preset")}};
    json out;
    out["input"] = node.at("input");
    json layers = json::array();
    for (const auto& layer : node.at("layers")) {
        json l = layer;
        if (layer.at("type") == "dense" && !layer.contains("act"))
            l["act"] = "none";
        if (layer.at("type") == "conv2d") {
            if (!layer.contains("act"))
                l["act"] = "none";
            if (!layer.contains("stride"))
                l["stride"] = 1;
        }
        layers.push_back(l);
    }
    out["layers"] = layers;
    return out;
}

} // namespace

void apply_override(nlohmann::json& doc, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);

    json value = json::parse(raw, nullptr, /*allow_exceptions=*/false);
    if (value.is_discarded())
        value = raw; // plain string

    json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty())
            throw ConfigError("--set: empty key segment in '" + path + "'");
        if (dot == std::string::npos) {
            (*node)[key] = value;
            return;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

TrainConfig parse_config_json(const json& doc, const std::string& source) {
    expect_object(doc, source);
    check_keys(doc, source, {"dataset", "target", "circuit", "mapping", "optimizer", "run"});
    if (!doc.contains("dataset"))
        fail("dataset", "required section");
    if (!doc.contains("target"))
        fail("target", "required section");

    TrainConfig cfg;
    cfg.dataset = parse_dataset(doc.at("dataset"));
    const int class_count =
        cfg.dataset.classes.empty() ? 10 : static_cast<int>(cfg.dataset.classes.size());
    cfg.target = parse_target(doc.at("target"), class_count);
    cfg.m = param_count(cfg.target);
    const int n_min = ceil_log2(cfg.m);

    // Circuit: defaults derive from m — N = ceil(log2 m), split near-evenly,
    // L = N.
    json circuit = doc.contains("circuit") ? doc.at("circuit") : json::object();
    expect_object(circuit, "circuit");
    check_keys(circuit, "circuit", {"splits", "layers"});
    if (circuit.contains("splits")) {
        const json& splits = circuit.at("splits");
        if (!splits.is_array() || splits.empty())
            fail("circuit.splits", "expected a nonempty array");
        int total = 0;
        for (std::size_t i = 0; i < splits.size(); ++i) {
            const int s = static_cast<int>(
                get_int(splits[i], "circuit.splits[" + std::to_string(i) + "]", 1, 62));
            cfg.circuit.splits.push_back(s);
            total += s;
        }
        if (total < n_min)
            fail("circuit.splits", "sum " + std::to_string(total) + " < required ceil(log2(m)) = " +
                                       std::to_string(n_min) + " for m = " + std::to_string(cfg.m));
        cfg.circuit.total_qubits = total;
    } else {
        cfg.circuit.total_qubits = n_min;
        if (n_min >= 2)
            cfg.circuit.splits = {(n_min + 1) / 2, n_min / 2};
        else
            cfg.circuit.splits = {n_min};
    }
    cfg.circuit.layers =
        circuit.contains("layers")
            ? static_cast<int>(get_int(circuit.at("layers"), "circuit.layers", 0, 100000))
            : cfg.circuit.total_qubits;
    cfg.circuit.validate();

    json mapping = doc.contains("mapping") ? doc.at("mapping") : json::object();
    expect_object(mapping, "mapping");
    check_keys(mapping, "mapping", {"kind", "bond_dim", "hidden"});
    std::string kind = "mps";
    if (mapping.contains("kind")) {
        kind = get_string(mapping.at("kind"), "mapping.kind");
        if (kind != "mps" && kind != "mlp")
            fail("mapping.kind", "expected mps | mlp");
    }
    cfg.mapping.kind = kind == "mps" ? MappingConfig::Kind::Mps : MappingConfig::Kind::Mlp;
    if (cfg.mapping.kind == MappingConfig::Kind::Mps) {
        if (mapping.contains("hidden"))
            fail("mapping.hidden", "only valid for kind = mlp");
        if (mapping.contains("bond_dim"))
            cfg.mapping.bond_dim =
                static_cast<int>(get_int(mapping.at("bond_dim"), "mapping.bond_dim", 1, 4096));
    } else {
        if (mapping.contains("bond_dim"))
            fail("mapping.bond_dim", "only valid for kind = mps");
        if (mapping.contains("hidden"))
            cfg.mapping.hidden =
                static_cast<int>(get_int(mapping.at("hidden"), "mapping.hidden", 1, 1 << 20));
    }

    json optimizer = doc.contains("optimizer") ? doc.at("optimizer") : json::object();
    expect_object(optimizer, "optimizer");
    check_keys(optimizer, "optimizer", {"lr_theta", "lr_mapping"});
    if (optimizer.contains("lr_theta")) {
        cfg.optimizer.lr_theta = get_number(optimizer.at("lr_theta"), "optimizer.lr_theta");
        if (cfg.optimizer.lr_theta < 0.0)
            fail("optimizer.lr_theta", "must be >= 0");
    }
    if (optimizer.contains("lr_mapping")) {
        cfg.optimizer.lr_mapping = get_number(optimizer.at("lr_mapping"), "optimizer.lr_mapping");
        if (cfg.optimizer.lr_mapping < 0.0)
            fail("optimizer.lr_mapping", "must be >= 0");
    }

    json run = doc.contains("run") ? doc.at("run") : json::object();
    expect_object(run, "run");
    check_keys(run, "run",
               {"epochs", "batch_size", "seed", "output_dir", "prob_scale", "eval_every",
                "checkpoint_every", "record_timing", "resume"});
    if (run.contains("epochs"))
        cfg.run.epochs = static_cast<int>(get_int(run.at("epochs"), "run.epochs", 0, 1'000'000));
    if (run.contains("batch_size"))
        cfg.run.batch_size =
            static_cast<int>(get_int(run.at("batch_size"), "run.batch_size", 1, 1'000'000));
    if (run.contains("seed")) {
        if (!run.at("seed").is_number_integer())
            fail("run.seed", "expected an integer");
        cfg.run.seed = run.at("seed").get<std::uint64_t>();
    }
    if (run.contains("output_dir"))
        cfg.run.output_dir = get_string(run.at("output_dir"), "run.output_dir");
    if (run.contains("prob_scale"))
        cfg.run.prob_scale = get_bool(run.at("prob_scale"), "run.prob_scale");
    if (run.contains("eval_every"))
        cfg.run.eval_every =
            static_cast<int>(get_int(run.at("eval_every"), "run.eval_every", 1, 1'000'000));
    if (run.contains("checkpoint_every"))
        cfg.run.checkpoint_every = static_cast<int>(
            get_int(run.at("checkpoint_every"), "run.checkpoint_every", 0, 1'000'000));
    if (run.contains("record_timing"))
        cfg.run.record_timing = get_bool(run.at("record_timing"), "run.record_timing");
    if (run.contains("resume"))
        cfg.run.resume = get_string(run.at("resume"), "run.resume");

    // Defaults-applied echo; reparsing it yields an equivalent config.
    json echo;
    json ds{{"name", cfg.dataset.name}, {"data_dir", cfg.dataset.data_dir}};
    if (!cfg.dataset.classes.empty())
        ds["classes"] = cfg.dataset.classes;
    if (cfg.dataset.per_class_cap)
        ds["per_class_cap"] = *cfg.dataset.per_class_cap;
    if (cfg.dataset.test_per_class_cap)
        ds["test_per_class_cap"] = *cfg.dataset.test_per_class_cap;
    echo["dataset"] = ds;
    echo["target"] = target_echo(doc.at("target"));
    echo["circuit"] = json{{"splits", cfg.circuit.splits}, {"layers", cfg.circuit.layers}};
    json map_echo{{"kind", kind}};
    if (cfg.mapping.kind == MappingConfig::Kind::Mps)
        map_echo["bond_dim"] = cfg.mapping.bond_dim;
    else
        map_echo["hidden"] = cfg.mapping.hidden;
    echo["mapping"] = map_echo;
    echo["optimizer"] =
        json{{"lr_theta", cfg.optimizer.lr_theta}, {"lr_mapping", cfg.optimizer.lr_mapping}};
    echo["run"] = json{{"epochs", cfg.run.epochs},
                       {"batch_size", cfg.run.batch_size},
                       {"seed", cfg.run.seed},
                       {"output_dir", cfg.run.output_dir},
                       {"prob_scale", cfg.run.prob_scale},
                       {"eval_every", cfg.run.eval_every},
                       {"checkpoint_every", cfg.run.checkpoint_every},
                       {"record_timing", cfg.run.record_timing}};
    if (!cfg.run.resume.empty())
        echo["run"]["resume"] = cfg.run.resume;
    cfg.echo = std::move(echo);
    return cfg;
}

TrainConfig parse_config_file(const std::string& path, const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    json doc = json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (doc.is_discarded())
        throw ConfigError(path + ": not valid JSON");
    for (const auto& assignment : overrides)
        apply_override(doc, assignment);
    return parse_config_json(doc, path);
}

} // namespace qtrain
