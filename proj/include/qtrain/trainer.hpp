#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qtrain/circuit.hpp"
#include "qtrain/config.hpp"
#include "qtrain/dataset.hpp"
#include "qtrain/mapping.hpp"
#include "qtrain/target_network.hpp"

namespace qtrain {

struct AdamMoments {
    std::vector<double> m, v;
};

/// Everything the optimizer touches plus the frozen experiment geometry. The
/// generated target weights are deliberately not part of the state; they are
/// rebuilt from theta and the mapping every time they are needed.
struct TrainState {
    CircuitSpec circuit;
    ThetaParams theta;
    Mapping mapping;
    TargetNetworkSpec target;
    OptimizerConfig opt;
    bool prob_scale = true;
    std::uint64_t seed = 0;
    long long step = 0;
    AdamMoments adam_theta, adam_mapping;
    std::size_t m = 0; // target parameter count

    /// Instrumentation: number of times the full weight vector was generated.
    mutable long long weight_generations = 0;
};

TrainState init_train_state(const TrainConfig& cfg);

/// Pointers to every theta entry, split-major then layer-major; the exact
/// order of the theta gradient vector.
std::vector<double*> collect_theta_params(ThetaParams& theta);

/// simulate per split -> probabilities -> Kronecker combine -> mapping.
WeightVector generate_full_weights(const TrainState& state);

struct ParamBreakdown {
    std::size_t theta = 0;
    std::size_t mapping = 0;
    std::size_t total = 0;
    std::size_t m = 0;
    double ratio = 0.0;
};

ParamBreakdown count_trainable_params(const TrainState& state);

/// Loss and exact gradients of the whole composite for one batch, without
/// touching the state. Gradient orders match collect_theta_params and
/// collect_mapping_params.
struct StepGradients {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<double> theta_grad;
    std::vector<double> mapping_grad;
};

StepGradients compute_step_gradients(const TrainState& state, const Batch& batch);

/// Forward-only composite loss, used by finite-difference checks.
double pipeline_loss(const TrainState& state, const Batch& batch);

struct MetricsRecord {
    long long step = 0;
    int epoch = 0;
    double loss = 0.0;
    double train_acc = 0.0;
    std::optional<double> test_acc;
    long long wall_ms = 0;
    std::size_t trainable = 0;
    std::size_t m = 0;
};

std::string metrics_csv_header();
std::string metrics_csv_row(const MetricsRecord& record);

/// One optimizer step. Parameter groups with a zero learning rate are left
/// untouched (moments included); the step counter always advances. Throws
/// DivergenceError when the loss or any parameter leaves the finite range.
MetricsRecord train_step(TrainState& state, const Batch& batch, int epoch = 0);

struct EvalResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Full-dataset evaluation with freshly generated weights.
EvalResult evaluate(const TrainState& state, const Dataset& data, int chunk = 512);

struct RunSummary {
    long long steps = 0;
    double final_loss = 0.0;
    double final_train_acc = 0.0;
    std::optional<double> final_test_acc;
    std::string metrics_path;
    std::string checkpoint_path;
    long long wall_ms = 0;
};

/// Loads the configured dataset and runs the experiment.
RunSummary run_experiment(const TrainConfig& cfg);

/// Same loop on pre-loaded datasets (used by tests and the comparison
/// harness). Writes metrics CSV and checkpoints under run.output_dir.
RunSummary run_experiment_on(const TrainConfig& cfg, const Dataset& train, const Dataset& test);

} // namespace qtrain
