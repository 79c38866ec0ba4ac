#include "qtrain/trainer.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "qtrain/checkpoint.hpp"
#include "qtrain/errors.hpp"

namespace qtrain {

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

struct PipelineForward {
    std::vector<ProbVector> sub_probs;
    ProbVector combined;
    MappingInputs inputs;
    WeightVector omega;
};

PipelineForward forward_pipeline(const TrainState& state) {
    if ((std::size_t{1} << state.circuit.total_qubits) < state.m)
        throw ConfigError("insufficient qubits: m = " + std::to_string(state.m) + " needs N >= " +
                          std::to_string(ceil_log2(state.m)) + ", circuit has " +
                          std::to_string(state.circuit.total_qubits));
    PipelineForward fwd;
    fwd.sub_probs.reserve(state.circuit.splits.size());
    for (std::size_t j = 0; j < state.circuit.splits.size(); ++j) {
        const auto sv = simulate_subcircuit(state.circuit.splits[j], state.circuit.layers,
                                            state.theta.per_split[j]);
        fwd.sub_probs.push_back(probabilities(sv));
    }
    fwd.combined = combine_distributed(fwd.sub_probs);
    fwd.inputs = build_mapping_inputs(fwd.combined, state.m, state.prob_scale);
    fwd.omega = map_weights(state.mapping, fwd.inputs);
    ++state.weight_generations;
    return fwd;
}

// Product-rule reduction across Kronecker factors: for the combined index i
// with factor digits (i_1 .. i_k), dL/dp_j[i_j] += dL/dp[i] * prod_{l != j} p_l[i_l].
// Only the first m combined entries carry gradient.
std::vector<std::vector<double>> split_prob_gradient(const TrainState& state,
                                                     const std::vector<ProbVector>& sub_probs,
                                                     std::span<const double> dp) {
    const std::size_t k = sub_probs.size();
    std::vector<std::vector<double>> out(k);
    for (std::size_t j = 0; j < k; ++j)
        out[j].assign(sub_probs[j].p.size(), 0.0);

    std::vector<std::size_t> digits(k);
    for (std::size_t i = 0; i < dp.size(); ++i) {
        if (dp[i] == 0.0)
            continue;
        std::size_t rem = i;
        for (std::size_t j = k; j-- > 0;) {
            const int bits = state.circuit.splits[j];
            digits[j] = rem & ((std::size_t{1} << bits) - 1);
            rem >>= bits;
        }
        for (std::size_t j = 0; j < k; ++j) {
            double contribution = dp[i];
            for (std::size_t l = 0; l < k; ++l)
                if (l != j)
                    contribution *= sub_probs[l].p[digits[l]];
            out[j][digits[j]] += contribution;
        }
    }
    return out;
}

void adam_apply(const std::vector<double*>& params, std::span<const double> grad,
                AdamMoments& moments, double lr, const OptimizerConfig& opt, long long t) {
    const double bc1 = 1.0 - std::pow(opt.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(opt.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& m = moments.m[i];
        double& v = moments.v[i];
        m = opt.beta1 * m + (1.0 - opt.beta1) * grad[i];
        v = opt.beta2 * v + (1.0 - opt.beta2) * grad[i] * grad[i];
        *params[i] -= lr * (m / bc1) / (std::sqrt(v / bc2) + opt.eps);
    }
}

std::string divergence_diagnostic(const TrainState& state, double loss) {
    double max_theta = 0.0;
    for (const auto& block : state.theta.per_split)
        for (double a : block)
            max_theta = std::max(max_theta, std::fabs(a));
    double max_map = 0.0;
    for (const double* p : collect_mapping_params(state.mapping))
        max_map = std::max(max_map, std::fabs(*p));
    return "step " + std::to_string(state.step) + ": loss = " + fmt_double(loss) +
           ", max|theta| = " + fmt_double(max_theta) + ", max|mapping| = " + fmt_double(max_map);
}

bool params_finite(const TrainState& state) {
    for (const auto& block : state.theta.per_split)
        for (double a : block)
            if (!std::isfinite(a))
                return false;
    for (const double* p : collect_mapping_params(state.mapping))
        if (!std::isfinite(*p))
            return false;
    return true;
}

} // namespace

TrainState init_train_state(const TrainConfig& cfg) {
    TrainState state;
    state.circuit = cfg.circuit;
    state.circuit.validate();
    state.theta = ThetaParams::random(state.circuit, cfg.run.seed);
    const int sites = state.circuit.total_qubits + 1;
    if (cfg.mapping.kind == MappingConfig::Kind::Mps)
        state.mapping = MpsMapping::init(sites, cfg.mapping.bond_dim, cfg.run.seed);
    else
        state.mapping = MlpMapping::init(sites, cfg.mapping.hidden, cfg.run.seed);
    state.target = cfg.target;
    state.opt = cfg.optimizer;
    state.prob_scale = cfg.run.prob_scale;
    state.seed = cfg.run.seed;
    state.m = cfg.m;
    if ((std::size_t{1} << state.circuit.total_qubits) < state.m)
        throw ConfigError("insufficient qubits: m = " + std::to_string(state.m) + " needs N >= " +
                          std::to_string(ceil_log2(state.m)));
    state.adam_theta.m.assign(state.theta.total_count(), 0.0);
    state.adam_theta.v.assign(state.theta.total_count(), 0.0);
    state.adam_mapping.m.assign(count_mapping_params(state.mapping), 0.0);
    state.adam_mapping.v.assign(count_mapping_params(state.mapping), 0.0);
    return state;
}

std::vector<double*> collect_theta_params(ThetaParams& theta) {
    std::vector<double*> params;
    params.reserve(theta.total_count());
    for (auto& block : theta.per_split)
        for (double& a : block)
            params.push_back(&a);
    return params;
}

WeightVector generate_full_weights(const TrainState& state) {
    return forward_pipeline(state).omega;
}

ParamBreakdown count_trainable_params(const TrainState& state) {
    ParamBreakdown breakdown;
    breakdown.theta = state.theta.total_count();
    breakdown.mapping = count_mapping_params(state.mapping);
    breakdown.total = breakdown.theta + breakdown.mapping;
    breakdown.m = state.m;
    breakdown.ratio = static_cast<double>(breakdown.total) / static_cast<double>(breakdown.m);
    return breakdown;
}

StepGradients compute_step_gradients(const TrainState& state, const Batch& batch) {
    const PipelineForward fwd = forward_pipeline(state);
    const TargetNetwork net = assign_weights(state.target, fwd.omega);
    const BackwardResult target_bwd = backward(net, batch);

    const MappingBackprop map_bwd =
        mapping_backprop(state.mapping, fwd.inputs, target_bwd.grad);

    const auto per_split_upstream = split_prob_gradient(state, fwd.sub_probs, map_bwd.prob_grad);

    StepGradients grads;
    grads.loss = target_bwd.loss;
    grads.accuracy = target_bwd.accuracy;
    grads.mapping_grad = map_bwd.param_grad;
    grads.theta_grad.reserve(state.theta.total_count());
    for (std::size_t j = 0; j < state.circuit.splits.size(); ++j) {
        const auto g = adjoint_gradient(state.circuit.splits[j], state.circuit.layers,
                                        state.theta.per_split[j], per_split_upstream[j]);
        grads.theta_grad.insert(grads.theta_grad.end(), g.begin(), g.end());
    }
    return grads;
}

double pipeline_loss(const TrainState& state, const Batch& batch) {
    const PipelineForward fwd = forward_pipeline(state);
    const TargetNetwork net = assign_weights(state.target, fwd.omega);
    return forward_loss(net, batch).loss;
}

std::string metrics_csv_header() { return "step,epoch,loss,train_acc,test_acc,wall_ms,trainable,m"; }

std::string metrics_csv_row(const MetricsRecord& r) {
    std::string row = std::to_string(r.step) + "," + std::to_string(r.epoch) + "," +
                      fmt_double(r.loss) + "," + fmt_double(r.train_acc) + ",";
    if (r.test_acc)
        row += fmt_double(*r.test_acc);
    row += "," + std::to_string(r.wall_ms) + "," + std::to_string(r.trainable) + "," +
           std::to_string(r.m);
    return row;
}

MetricsRecord train_step(TrainState& state, const Batch& batch, int epoch) {
    const StepGradients grads = compute_step_gradients(state, batch);
    if (!std::isfinite(grads.loss) || std::fabs(grads.loss) > 1e6)
        throw DivergenceError("non-finite or exploding loss; " +
                              divergence_diagnostic(state, grads.loss));

    ++state.step;
    if (state.opt.lr_theta > 0.0)
        adam_apply(collect_theta_params(state.theta), grads.theta_grad, state.adam_theta,
                   state.opt.lr_theta, state.opt, state.step);
    if (state.opt.lr_mapping > 0.0)
        adam_apply(collect_mapping_params(state.mapping), grads.mapping_grad, state.adam_mapping,
                   state.opt.lr_mapping, state.opt, state.step);
    if (!params_finite(state))
        throw DivergenceError("non-finite parameter after update; " +
                              divergence_diagnostic(state, grads.loss));

    const ParamBreakdown breakdown = count_trainable_params(state);
    MetricsRecord record;
    record.step = state.step;
    record.epoch = epoch;
    record.loss = grads.loss;
    record.train_acc = grads.accuracy;
    record.trainable = breakdown.total;
    record.m = breakdown.m;
    return record;
}

EvalResult evaluate(const TrainState& state, const Dataset& data, int chunk) {
    if (data.count() == 0)
        throw DataError("evaluate: empty dataset");
    const PipelineForward fwd = forward_pipeline(state);
    const TargetNetwork net = assign_weights(state.target, fwd.omega);

    double loss_sum = 0.0;
    double correct_sum = 0.0;
    std::vector<int> indices;
    for (std::size_t start = 0; start < data.count(); start += static_cast<std::size_t>(chunk)) {
        const std::size_t end = std::min(data.count(), start + static_cast<std::size_t>(chunk));
        indices.resize(end - start);
        for (std::size_t i = start; i < end; ++i)
            indices[i - start] = static_cast<int>(i);
        const Batch batch = make_batch(data, indices);
        const LossResult res = forward_loss(net, batch);
        loss_sum += res.loss * batch.count;
        correct_sum += res.accuracy * batch.count;
    }
    return {loss_sum / static_cast<double>(data.count()),
            correct_sum / static_cast<double>(data.count())};
}

namespace {

void check_dataset_against_config(const TrainConfig& cfg, const Dataset& data,
                                  const std::string& which) {
    if (data.count() == 0)
        throw DataError(which + " dataset is empty");
    if (data.channels != cfg.target.input_shape[0] || data.height != cfg.target.input_shape[1] ||
        data.width != cfg.target.input_shape[2])
        throw DataError(which + " dataset shape (" + std::to_string(data.channels) + ", " +
                        std::to_string(data.height) + ", " + std::to_string(data.width) +
                        ") does not match target input shape");
    if (data.class_count != cfg.target.class_count)
        throw DataError(which + " dataset has " + std::to_string(data.class_count) +
                        " classes, target expects " + std::to_string(cfg.target.class_count));
}

void check_resume_compatible(const TrainConfig& cfg, const TrainState& state) {
    if (state.circuit.splits != cfg.circuit.splits || state.circuit.layers != cfg.circuit.layers)
        throw ConfigError("resume: checkpoint circuit geometry differs from config");
    if (state.m != cfg.m)
        throw ConfigError("resume: checkpoint m = " + std::to_string(state.m) +
                          " differs from config m = " + std::to_string(cfg.m));
    if (state.seed != cfg.run.seed)
        throw ConfigError("resume: checkpoint seed differs from config seed");
    if (state.prob_scale != cfg.run.prob_scale)
        throw ConfigError("resume: checkpoint prob_scale differs from config");
    const bool want_mps = cfg.mapping.kind == MappingConfig::Kind::Mps;
    if (want_mps != std::holds_alternative<MpsMapping>(state.mapping))
        throw ConfigError("resume: checkpoint mapping kind differs from config");
}

} // namespace

RunSummary run_experiment(const TrainConfig& cfg) {
    const std::string dir = cfg.dataset.data_dir;
    Dataset train, test;
    if (cfg.dataset.name == "mnist") {
        train = load_mnist_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
        test = load_mnist_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    } else {
        std::vector<std::string> batches;
        for (int i = 1; i <= 5; ++i)
            batches.push_back(dir + "/data_batch_" + std::to_string(i) + ".bin");
        train = load_cifar10_binary(batches);
        test = load_cifar10_binary({dir + "/test_batch.bin"});
    }
    train.split = "train";
    test.split = "test";
    if (!cfg.dataset.classes.empty()) {
        train = subset(train, cfg.dataset.classes, cfg.dataset.per_class_cap);
        test = subset(test, cfg.dataset.classes, cfg.dataset.test_per_class_cap);
    } else {
        if (cfg.dataset.per_class_cap) {
            std::vector<int> all(static_cast<std::size_t>(train.class_count));
            for (int c = 0; c < train.class_count; ++c)
                all[static_cast<std::size_t>(c)] = c;
            train = subset(train, all, cfg.dataset.per_class_cap);
        }
        if (cfg.dataset.test_per_class_cap) {
            std::vector<int> all(static_cast<std::size_t>(test.class_count));
            for (int c = 0; c < test.class_count; ++c)
                all[static_cast<std::size_t>(c)] = c;
            test = subset(test, all, cfg.dataset.test_per_class_cap);
        }
    }
    return run_experiment_on(cfg, train, test);
}

RunSummary run_experiment_on(const TrainConfig& cfg, const Dataset& train, const Dataset& test) {
    check_dataset_against_config(cfg, train, "train");
    check_dataset_against_config(cfg, test, "test");

    namespace fs = std::filesystem;
    fs::create_directories(cfg.run.output_dir);
    const std::string metrics_path = cfg.run.output_dir + "/metrics.csv";

    TrainState state;
    int start_epoch = 0;
    const std::size_t steps_per_epoch =
        (train.count() + static_cast<std::size_t>(cfg.run.batch_size) - 1) /
        static_cast<std::size_t>(cfg.run.batch_size);
    const bool fresh = cfg.run.resume.empty();
    if (fresh) {
        state = init_train_state(cfg);
    } else {
        LoadedCheckpoint loaded = load_checkpoint(cfg.run.resume);
        state = std::move(loaded.state);
        check_resume_compatible(cfg, state);
        if (state.step % static_cast<long long>(steps_per_epoch) != 0)
            throw ConfigError("resume: checkpoint step " + std::to_string(state.step) +
                              " is not an epoch boundary for " + std::to_string(steps_per_epoch) +
                              " steps/epoch");
        start_epoch = static_cast<int>(state.step / static_cast<long long>(steps_per_epoch));
        if (start_epoch > cfg.run.epochs)
            throw ConfigError("resume: checkpoint already past run.epochs");
    }

    std::ofstream metrics;
    if (fresh || !fs::exists(metrics_path)) {
        metrics.open(metrics_path, std::ios::trunc);
        metrics << metrics_csv_header() << "\n";
    } else {
        metrics.open(metrics_path, std::ios::app);
    }
    if (!metrics)
        throw DataError("cannot write " + metrics_path);

    const auto t0 = std::chrono::steady_clock::now();
    auto wall_now = [&]() -> long long {
        if (!cfg.run.record_timing)
            return 0;
        return std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::steady_clock::now() - t0)
            .count();
    };
    const ParamBreakdown breakdown = count_trainable_params(state);

    RunSummary summary;
    summary.metrics_path = metrics_path;

    if (fresh) {
        const EvalResult train_eval = evaluate(state, train);
        const EvalResult test_eval = evaluate(state, test);
        MetricsRecord initial;
        initial.step = 0;
        initial.epoch = 0;
        initial.loss = train_eval.loss;
        initial.train_acc = train_eval.accuracy;
        initial.test_acc = test_eval.accuracy;
        initial.wall_ms = wall_now();
        initial.trainable = breakdown.total;
        initial.m = breakdown.m;
        metrics << metrics_csv_row(initial) << "\n";
        summary.final_loss = train_eval.loss;
        summary.final_train_acc = train_eval.accuracy;
        summary.final_test_acc = test_eval.accuracy;
        std::cout << "initial: loss " << train_eval.loss << ", train acc " << train_eval.accuracy
                  << ", test acc " << test_eval.accuracy << std::endl;
    }

    try {
        for (int epoch = start_epoch + 1; epoch <= cfg.run.epochs; ++epoch) {
            double epoch_loss = 0.0;
            double epoch_correct = 0.0;
            std::size_t epoch_examples = 0;
            for (const auto& idx : batches(train, cfg.run.batch_size, cfg.run.seed, epoch)) {
                const Batch batch = make_batch(train, idx);
                MetricsRecord record = train_step(state, batch, epoch);
                record.wall_ms = wall_now();
                metrics << metrics_csv_row(record) << "\n";
                epoch_loss += record.loss * batch.count;
                epoch_correct += record.train_acc * batch.count;
                epoch_examples += static_cast<std::size_t>(batch.count);
                summary.final_loss = record.loss;
                summary.final_train_acc = record.train_acc;
            }
            const double mean_loss = epoch_loss / static_cast<double>(epoch_examples);
            const double mean_acc = epoch_correct / static_cast<double>(epoch_examples);

            if (epoch % cfg.run.eval_every == 0 || epoch == cfg.run.epochs) {
                const EvalResult test_eval = evaluate(state, test);
                MetricsRecord record;
                record.step = state.step;
                record.epoch = epoch;
                record.loss = mean_loss;
                record.train_acc = mean_acc;
                record.test_acc = test_eval.accuracy;
                record.wall_ms = wall_now();
                record.trainable = breakdown.total;
                record.m = breakdown.m;
                metrics << metrics_csv_row(record) << "\n";
                summary.final_loss = mean_loss;
                summary.final_train_acc = mean_acc;
                summary.final_test_acc = test_eval.accuracy;
                std::cout << "epoch " << epoch << ": loss " << mean_loss << ", train acc "
                          << mean_acc << ", test acc " << test_eval.accuracy << std::endl;
            }
            if (cfg.run.checkpoint_every > 0 && epoch % cfg.run.checkpoint_every == 0 &&
                epoch != cfg.run.epochs) {
                save_checkpoint(state, cfg.echo,
                                cfg.run.output_dir + "/checkpoint_epoch_" + std::to_string(epoch) +
                                    ".qt");
            }
            metrics.flush();
        }
    } catch (const DivergenceError& err) {
        nlohmann::json diag{{"error", "divergence"}, {"detail", err.what()}, {"step", state.step}};
        std::ofstream out(cfg.run.output_dir + "/divergence.json");
        out << diag.dump(2) << "\n";
        throw;
    }

    summary.checkpoint_path = cfg.run.output_dir + "/checkpoint_final.qt";
    save_checkpoint(state, cfg.echo, summary.checkpoint_path);
    summary.steps = state.step;
    summary.wall_ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          std::chrono::steady_clock::now() - t0)
                          .count();
    return summary;
}

} // namespace qtrain
