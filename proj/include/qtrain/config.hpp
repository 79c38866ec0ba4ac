#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "qtrain/circuit.hpp"
#include "qtrain/target_network.hpp"

namespace qtrain {

struct DatasetConfig {
    std::string name;     // "mnist" or "cifar10"
    std::string data_dir; // directory holding the canonical binary files
    std::vector<int> classes; // empty = all classes
    std::optional<std::size_t> per_class_cap;      // train split
    std::optional<std::size_t> test_per_class_cap; // test split
};

struct MappingConfig {
    enum class Kind { Mps, Mlp };
    Kind kind = Kind::Mps;
    int bond_dim = 4; // mps
    int hidden = 20;  // mlp
};

struct OptimizerConfig {
    double lr_theta = 5e-3;
    double lr_mapping = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct RunConfig {
    int epochs = 10;
    int batch_size = 32;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    bool prob_scale = true;
    int eval_every = 1;        // test evaluation cadence, in epochs
    int checkpoint_every = 0;  // 0 = final checkpoint only
    bool record_timing = false; // real wall_ms breaks bitwise-reproducible metrics
    std::string resume;        // checkpoint path, empty = fresh start
};

/// Fully resolved experiment configuration. `echo` is the defaults-applied
/// JSON document that reparses to an equivalent config; it is embedded in
/// checkpoints for reproducibility.
struct TrainConfig {
    DatasetConfig dataset;
    TargetNetworkSpec target;
    CircuitSpec circuit;
    MappingConfig mapping;
    OptimizerConfig optimizer;
    RunConfig run;
    std::size_t m = 0; // target parameter count
    nlohmann::json echo;
};

int ceil_log2(std::size_t value);

/// Applies one "key.path=value" override in place; the value is parsed as
/// JSON when possible and kept as a string otherwise.
void apply_override(nlohmann::json& doc, const std::string& assignment);

/// Validates and resolves a config document. Unknown keys, type mismatches,
/// and constraint violations raise ConfigError with the offending key path.
TrainConfig parse_config_json(const nlohmann::json& doc, const std::string& source);

TrainConfig parse_config_file(const std::string& path,
                              const std::vector<std::string>& overrides = {});

} // namespace qtrain
