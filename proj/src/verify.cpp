#include "qtrain/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "qtrain/errors.hpp"
#include "qtrain/mapping.hpp"
#include "qtrain/rng.hpp"
#include "qtrain/target_network.hpp"
#include "qtrain/trainer.hpp"

namespace qtrain {

ProbVector monolithic_disjoint_probs(const CircuitSpec& spec, const ThetaParams& theta) {
    spec.validate();
    const int n = spec.total_qubits;
    std::vector<double> amp(std::size_t{1} << n, 0.0);
    amp[0] = 1.0;

    std::vector<int> offsets;
    int offset = 0;
    for (int s : spec.splits) {
        offsets.push_back(offset);
        offset += s;
    }
    for (int l = 0; l < spec.layers; ++l) {
        for (std::size_t j = 0; j < spec.splits.size(); ++j)
            for (int q = 0; q < spec.splits[j]; ++q)
                apply_ry(amp, n, offsets[j] + q,
                         theta.per_split[j][static_cast<std::size_t>(l) * spec.splits[j] + q]);
        for (std::size_t j = 0; j < spec.splits.size(); ++j)
            for (int i = 0; i + 1 < spec.splits[j]; ++i)
                apply_cnot(amp, n, offsets[j] + i, offsets[j] + i + 1);
    }
    StateVector state;
    state.qubits = n;
    state.amp = std::move(amp);
    return probabilities(state);
}

namespace {

constexpr double kPi = 3.14159265358979323846;

std::vector<double> random_angles(Rng& rng, std::size_t count) {
    std::vector<double> angles(count);
    for (double& a : angles)
        a = rng.uniform(-kPi, kPi);
    return angles;
}

std::vector<double> random_upstream(Rng& rng, std::size_t count) {
    std::vector<double> u(count);
    for (double& v : u)
        v = rng.uniform(-1.0, 1.0);
    return u;
}

// Roundoff bound of a central-difference stencil: the quotient cannot be
// trusted below this, so sub-noise disagreements do not count against the
// gradient under test.
double fd_noise(double f_plus, double f_zero, double f_minus, double h) {
    const double scale = std::max({std::fabs(f_plus), std::fabs(f_zero), std::fabs(f_minus)});
    return 32.0 * std::numeric_limits<double>::epsilon() * scale / (2.0 * h);
}

double fd_rel_error(double analytic, double fd, double noise, double floor = 1e-8) {
    const double excess = std::max(0.0, std::fabs(analytic - fd) - noise);
    return excess / std::max(std::fabs(fd), floor);
}

// Detects points where a central difference is not a valid oracle (relu or
// clamp kinks inside the stencil). Uses forward values only, so it stays
// independent of the gradient under test.
bool fd_stencil_smooth(double f_plus, double f_zero, double f_minus) {
    return std::fabs(f_plus - 2.0 * f_zero + f_minus) < 1e-7;
}

struct FdComparison {
    double max_rel = 0.0;
    int skipped = 0;
    int compared = 0;
};

// Central finite differences of `f` against `analytic`, perturbing the
// doubles behind `params` in place.
FdComparison fd_compare(const std::vector<double*>& params, std::span<const double> analytic,
                        const std::function<double()>& f, double h, bool guard_kinks) {
    FdComparison cmp;
    const double f0 = f();
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double saved = *params[k];
        *params[k] = saved + h;
        const double fp = f();
        *params[k] = saved - h;
        const double fm = f();
        *params[k] = saved;
        if (guard_kinks && !fd_stencil_smooth(fp, f0, fm)) {
            ++cmp.skipped;
            continue;
        }
        const double fd = (fp - fm) / (2.0 * h);
        cmp.max_rel =
            std::max(cmp.max_rel, fd_rel_error(analytic[k], fd, fd_noise(fp, f0, fm, h)));
        ++cmp.compared;
    }
    return cmp;
}

CheckResult make_result(std::string name, double max_dev, double tolerance, std::string detail = "") {
    CheckResult r;
    r.name = std::move(name);
    r.max_dev = max_dev;
    r.tolerance = tolerance;
    r.pass = max_dev <= tolerance;
    r.detail = std::move(detail);
    return r;
}

int pick_trials(const SuiteOptions& options, int fallback) {
    return options.trials > 0 ? options.trials : fallback;
}

// --- distributed suite ----------------------------------------------------

void check_state_norms(const SuiteOptions& options, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, 101));
    const int trials = pick_trials(options, 1000);
    double max_norm_dev = 0.0;
    double max_sum_dev = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int n = 1 + static_cast<int>(rng.below(12));
        const int layers = static_cast<int>(rng.below(9));
        const auto angles = random_angles(rng, static_cast<std::size_t>(layers) * n);
        const StateVector state = simulate_subcircuit(n, layers, angles);
        double norm_sq = 0.0;
        for (double a : state.amp)
            norm_sq += a * a;
        double norm_dev = std::fabs(std::sqrt(norm_sq) - 1.0);
        const ProbVector probs = probabilities(state);
        double sum = 0.0;
        for (double p : probs.p)
            sum += p;
        if (t == 0 && options.inject_failure)
            norm_dev += 1e-3;
        max_norm_dev = std::max(max_norm_dev, norm_dev);
        max_sum_dev = std::max(max_sum_dev, std::fabs(sum - 1.0));
    }
    out.push_back(make_result("state-norm", max_norm_dev, 1e-12,
                              std::to_string(trials) + " random instances, n <= 12, L <= 8"));
    out.push_back(make_result("probability-sum", max_sum_dev, 1e-10));
}

void check_distributed_equivalence(const SuiteOptions& options, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, 102));
    const int trials = pick_trials(options, 500);
    double max_dev = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int n = 2 + static_cast<int>(rng.below(11)); // 2 .. 12
        const int max_parts = std::min(4, n);
        const int k = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_parts - 1)));

        // Random composition of n into k parts >= 1.
        std::vector<int> cuts;
        std::vector<int> positions(static_cast<std::size_t>(n - 1));
        for (int i = 0; i < n - 1; ++i)
            positions[static_cast<std::size_t>(i)] = i + 1;
        rng.shuffle(positions);
        cuts.assign(positions.begin(), positions.begin() + (k - 1));
        std::sort(cuts.begin(), cuts.end());
        CircuitSpec spec;
        spec.total_qubits = n;
        spec.layers = static_cast<int>(rng.below(9));
        int prev = 0;
        for (int cut : cuts) {
            spec.splits.push_back(cut - prev);
            prev = cut;
        }
        spec.splits.push_back(n - prev);

        ThetaParams theta;
        for (int nj : spec.splits)
            theta.per_split.push_back(random_angles(rng, static_cast<std::size_t>(spec.layers) * nj));

        std::vector<ProbVector> sub;
        for (std::size_t j = 0; j < spec.splits.size(); ++j)
            sub.push_back(probabilities(
                simulate_subcircuit(spec.splits[j], spec.layers, theta.per_split[j])));
        ProbVector combined = combine_distributed(sub);
        const ProbVector mono = monolithic_disjoint_probs(spec, theta);
        if (t == 0 && options.inject_failure)
            combined.p[0] += 1e-3;
        for (std::size_t i = 0; i < combined.p.size(); ++i)
            max_dev = std::max(max_dev, std::fabs(combined.p[i] - mono.p[i]));
    }
    out.push_back(make_result("distributed-equivalence", max_dev, 1e-12,
                              std::to_string(trials) + " random splits vs monolithic register"));
}

void check_periodicity(const SuiteOptions& options, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, 103));
    const int trials = pick_trials(options, 100);
    double max_dev = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int n = 1 + static_cast<int>(rng.below(8));
        const int layers = 1 + static_cast<int>(rng.below(6));
        auto angles = random_angles(rng, static_cast<std::size_t>(layers) * n);
        const ProbVector base = probabilities(simulate_subcircuit(n, layers, angles));
        const std::size_t k = rng.below(angles.size());
        angles[k] += 2.0 * kPi;
        const ProbVector shifted = probabilities(simulate_subcircuit(n, layers, angles));
        for (std::size_t i = 0; i < base.p.size(); ++i)
            max_dev = std::max(max_dev, std::fabs(base.p[i] - shifted.p[i]));
    }
    out.push_back(make_result("angle-periodicity", max_dev, 1e-12));
}

// --- gradient suite --------------------------------------------------------

void check_adjoint_vs_shift(const SuiteOptions& options, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, 201));
    const int trials = pick_trials(options, 100);
    double max_dev = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int n = 1 + static_cast<int>(rng.below(6));
        const int layers = static_cast<int>(rng.below(5));
        const auto angles = random_angles(rng, static_cast<std::size_t>(layers) * n);
        const auto upstream = random_upstream(rng, std::size_t{1} << n);
        auto adjoint = adjoint_gradient(n, layers, angles, upstream);
        const auto shift = parameter_shift_gradient(n, layers, angles, upstream);
        if (t == 0 && options.inject_failure && !adjoint.empty())
            adjoint[0] += 1e-3;
        for (std::size_t k = 0; k < adjoint.size(); ++k)
            max_dev = std::max(max_dev, std::fabs(adjoint[k] - shift[k]));
    }
    out.push_back(make_result("adjoint-vs-parameter-shift", max_dev, 1e-10,
                              std::to_string(trials) + " random instances"));
}

void check_qnn_fd(const SuiteOptions& options, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, 202));
    const int trials = pick_trials(options, 100);
    const double h = 1e-5;
    double max_rel = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int n = 1 + static_cast<int>(rng.below(5));
        const int layers = 1 + static_cast<int>(rng.below(3));
        auto angles = random_angles(rng, static_cast<std::size_t>(layers) * n);
        const auto upstream = random_upstream(rng, std::size_t{1} << n);

        const auto adjoint = adjoint_gradient(n, layers, angles, upstream);
        const auto shift = parameter_shift_gradient(n, layers, angles, upstream);
        auto loss_at = [&]() {
            const StateVector s = simulate_subcircuit(n, layers, angles);
            double loss = 0.0;
            for (std::size_t i = 0; i < s.amp.size(); ++i)
                loss += upstream[i] * s.amp[i] * s.amp[i];
            return loss;
        };
        const double f0 = loss_at();
        for (std::size_t k = 0; k < angles.size(); ++k) {
            const double saved = angles[k];
            angles[k] = saved + h;
            const double fp = loss_at();
            angles[k] = saved - h;
            const double fm = loss_at();
            angles[k] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double noise = fd_noise(fp, f0, fm, h);
            max_rel = std::max(max_rel, fd_rel_error(adjoint[k], fd, noise));
            max_rel = std::max(max_rel, fd_rel_error(shift[k], fd, noise));
        }
    }
    out.push_back(make_result("qnn-gradient-vs-fd", max_rel, 1e-6,
                              "adjoint and parameter-shift vs central differences, h = 1e-5"));
}

MappingInputs synthetic_inputs(Rng& rng, int n_qubits, std::size_t m, bool prob_scale,
                               ProbVector* probs_out = nullptr) {
    // Probability entries chosen safely away from the prob_scale clamp at
    // v = p * 2^N = 1 so finite differences stay valid.
    const std::size_t dim = std::size_t{1} << n_qubits;
    ProbVector probs;
    probs.p.resize(dim);
    const double scale = std::ldexp(1.0, -n_qubits);
    for (double& p : probs.p) {
        const double coord = rng.uniform() < 0.7 ? rng.uniform(0.02, 0.95) : rng.uniform(1.1, 1.9);
        p = coord * scale;
    }
    if (probs_out)
        *probs_out = probs;
    return build_mapping_inputs(probs, m, prob_scale);
}

void check_mapping_fd(const SuiteOptions& options, bool use_mps, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, use_mps ? 203 : 204));
    const int trials = pick_trials(options, 100);
    const double h = 1e-6;
    double max_rel = 0.0;
    double max_prob_rel = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int n_qubits = 1 + static_cast<int>(rng.below(5));
        const int sites = n_qubits + 1;
        Mapping mapping;
        if (use_mps)
            mapping = MpsMapping::init(sites, 1 + static_cast<int>(rng.below(3)), rng.next_u64());
        else
            mapping = MlpMapping::init(sites, 2 + static_cast<int>(rng.below(5)), rng.next_u64());

        const std::size_t dim = std::size_t{1} << n_qubits;
        const std::size_t m = 1 + rng.below(std::min<std::size_t>(dim, 10));
        const bool prob_scale = rng.uniform() < 0.5;
        ProbVector probs;
        const MappingInputs inputs = synthetic_inputs(rng, n_qubits, m, prob_scale, &probs);
        const auto upstream = random_upstream(rng, m);

        auto backprop = mapping_backprop(mapping, inputs, upstream);
        if (t == 0 && options.inject_failure && !backprop.param_grad.empty())
            backprop.param_grad[0] += 1e-3;

        auto loss_at = [&]() {
            const WeightVector w = map_weights(mapping, inputs);
            double loss = 0.0;
            for (std::size_t i = 0; i < m; ++i)
                loss += upstream[i] * w.omega[i];
            return loss;
        };
        const auto params = collect_mapping_params(mapping);
        const auto cmp = fd_compare(params, backprop.param_grad, loss_at, h, false);
        max_rel = std::max(max_rel, cmp.max_rel);

        // Probability-coordinate gradient vs wiggling the raw probability.
        for (std::size_t i = 0; i < m; ++i) {
            auto loss_at_prob = [&](double p) {
                ProbVector perturbed = probs;
                perturbed.p[i] = p;
                const auto in2 = build_mapping_inputs(perturbed, m, prob_scale);
                const WeightVector w = map_weights(mapping, in2);
                double loss = 0.0;
                for (std::size_t k = 0; k < m; ++k)
                    loss += upstream[k] * w.omega[k];
                return loss;
            };
            const double p0 = probs.p[i];
            const double hp = 1e-6; // synthetic probabilities sit well clear of the clamp
            const double fp = loss_at_prob(p0 + hp);
            const double fm = loss_at_prob(p0 - hp);
            const double fd = (fp - fm) / (2.0 * hp);
            max_prob_rel = std::max(
                max_prob_rel,
                fd_rel_error(backprop.prob_grad[i], fd, fd_noise(fp, fp, fm, hp), 1e-6));
        }
    }
    const std::string name = use_mps ? "mps-backprop-vs-fd" : "mlp-backprop-vs-fd";
    out.push_back(make_result(name, max_rel, 1e-5, std::to_string(trials) + " random instances"));
    out.push_back(make_result(name + "-prob-coordinate", max_prob_rel, 1e-5));
}

TargetNetworkSpec random_micro_target(Rng& rng, bool conv) {
    TargetNetworkSpec spec;
    spec.class_count = 3;
    if (conv) {
        spec.input_shape = {1, 6, 6};
        spec.layers = {Conv2dLayer{1, 2, 3, 1, Activation::Relu}, MaxPool2dLayer{2},
                       FlattenLayer{}, DenseLayer{8, 3, Activation::None}};
    } else {
        spec.input_shape = {1, 1, 4};
        const int hidden = 4 + static_cast<int>(rng.below(4));
        spec.layers = {FlattenLayer{}, DenseLayer{4, hidden, Activation::Relu},
                       DenseLayer{hidden, 3, Activation::None}};
    }
    return spec;
}

void check_target_fd(const SuiteOptions& options, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, 205));
    const int trials = pick_trials(options, 100);
    const double h = 1e-5;
    double max_rel = 0.0;
    int skipped = 0;
    for (int t = 0; t < trials; ++t) {
        const bool conv = (t % 2) == 1;
        const TargetNetworkSpec spec = random_micro_target(rng, conv);
        WeightVector w;
        w.omega.resize(param_count(spec));
        for (double& v : w.omega)
            v = rng.normal(0.5);
        TargetNetwork net = assign_weights(spec, w);

        Batch batch;
        batch.count = 3;
        batch.input_shape = spec.input_shape;
        const std::size_t per = static_cast<std::size_t>(spec.input_shape[0]) *
                                spec.input_shape[1] * spec.input_shape[2];
        batch.inputs.resize(per * 3);
        for (double& v : batch.inputs)
            v = rng.uniform();
        for (int e = 0; e < 3; ++e)
            batch.labels.push_back(static_cast<int>(rng.below(3)));

        auto analytic = backward(net, batch).grad;
        if (t == 0 && options.inject_failure && !analytic.empty())
            analytic[0] += 1e-3;
        std::vector<double*> params;
        params.reserve(net.weights.size());
        for (double& v : net.weights)
            params.push_back(&v);
        auto loss_at = [&]() { return forward_loss(net, batch).loss; };
        const auto cmp = fd_compare(params, analytic, loss_at, h, true);
        max_rel = std::max(max_rel, cmp.max_rel);
        skipped += cmp.skipped;
    }
    out.push_back(make_result("target-backprop-vs-fd", max_rel, 1e-5,
                              std::to_string(trials) + " dense/conv instances, " +
                                  std::to_string(skipped) + " relu-kink stencils skipped"));
}

void check_end_to_end_fd(const SuiteOptions& options, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, 206));
    const int trials = pick_trials(options, 100);
    const double h = 1e-5;
    double max_rel = 0.0;
    int skipped = 0;
    for (int t = 0; t < trials; ++t) {
        TrainConfig cfg;
        cfg.target.input_shape = {1, 1, 2};
        cfg.target.class_count = 3;
        cfg.target.layers = {FlattenLayer{}, DenseLayer{2, 3, Activation::None}};
        cfg.m = param_count(cfg.target); // 9
        cfg.circuit.total_qubits = 4;
        cfg.circuit.splits = (t % 2 == 0) ? std::vector<int>{2, 2} : std::vector<int>{3, 1};
        cfg.circuit.layers = 1 + static_cast<int>(rng.below(2));
        if (t % 3 == 0) {
            cfg.mapping.kind = MappingConfig::Kind::Mlp;
            cfg.mapping.hidden = 3;
        } else {
            cfg.mapping.kind = MappingConfig::Kind::Mps;
            cfg.mapping.bond_dim = 2;
        }
        cfg.run.seed = rng.next_u64();
        cfg.run.prob_scale = true;
        TrainState state = init_train_state(cfg);

        Batch batch;
        batch.count = 2;
        batch.input_shape = cfg.target.input_shape;
        batch.inputs = {rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
        batch.labels = {static_cast<int>(rng.below(3)), static_cast<int>(rng.below(3))};

        auto grads = compute_step_gradients(state, batch);
        if (t == 0 && options.inject_failure && !grads.theta_grad.empty())
            grads.theta_grad[0] += 1e-3;
        std::vector<double> analytic = grads.theta_grad;
        analytic.insert(analytic.end(), grads.mapping_grad.begin(), grads.mapping_grad.end());

        std::vector<double*> params = collect_theta_params(state.theta);
        const auto mapping_params = collect_mapping_params(state.mapping);
        params.insert(params.end(), mapping_params.begin(), mapping_params.end());

        auto loss_at = [&]() { return pipeline_loss(state, batch); };
        const auto cmp = fd_compare(params, analytic, loss_at, h, true);
        max_rel = std::max(max_rel, cmp.max_rel);
        skipped += cmp.skipped;
    }
    out.push_back(make_result("end-to-end-gradient-vs-fd", max_rel, 1e-4,
                              std::to_string(trials) + " micro configs, " + std::to_string(skipped) +
                                  " clamp-kink stencils skipped"));
}

// --- mps-oracle suite -------------------------------------------------------

void check_contract_vs_dense(const SuiteOptions& options, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, 301));
    const int trials = pick_trials(options, 200);
    double max_dev = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int sites = 2 + static_cast<int>(rng.below(7));  // 2 .. 8
        const int r = 1 + static_cast<int>(rng.below(4));      // 1 .. 4
        MpsMapping mapping = MpsMapping::init(sites, r, rng.next_u64());
        std::vector<double> coords(static_cast<std::size_t>(sites));
        for (double& c : coords)
            c = rng.uniform();

        double fast = mps_contract(mapping, coords);
        if (t == 0 && options.inject_failure)
            fast += 1e-3;

        const std::vector<double> w = dense_oracle(mapping);
        double slow = 0.0;
        for (std::size_t idx = 0; idx < w.size(); ++idx) {
            double factor = 1.0;
            for (int j = 0; j < sites; ++j) {
                const int bit = static_cast<int>((idx >> (sites - 1 - j)) & 1u);
                factor *= bit == 0 ? coords[static_cast<std::size_t>(j)]
                                   : 1.0 - coords[static_cast<std::size_t>(j)];
            }
            slow += w[idx] * factor;
        }
        max_dev = std::max(max_dev, std::fabs(fast - slow));
    }
    out.push_back(make_result("mps-contract-vs-dense", max_dev, 1e-10,
                              std::to_string(trials) + " random mappings, sites <= 8, r <= 4"));
}

void check_multilinearity(const SuiteOptions& options, std::vector<CheckResult>& out) {
    Rng rng(Rng::mix(options.seed, 302));
    const int trials = pick_trials(options, 100);
    double max_dev = 0.0;
    for (int t = 0; t < trials; ++t) {
        const int sites = 2 + static_cast<int>(rng.below(7));
        const int r = 1 + static_cast<int>(rng.below(4));
        const MpsMapping mapping = MpsMapping::init(sites, r, rng.next_u64());
        std::vector<double> coords(static_cast<std::size_t>(sites));
        for (double& c : coords)
            c = rng.uniform();
        const std::size_t j = rng.below(static_cast<std::uint64_t>(sites));
        const double x = rng.uniform();
        coords[j] = x;
        const double at_x = mps_contract(mapping, coords);
        coords[j] = 0.0;
        const double at_0 = mps_contract(mapping, coords);
        coords[j] = 1.0;
        const double at_1 = mps_contract(mapping, coords);
        max_dev = std::max(max_dev, std::fabs(at_x - (at_0 + x * (at_1 - at_0))));
    }
    out.push_back(make_result("per-coordinate-affinity", max_dev, 1e-10));
}

void check_param_enumeration(const SuiteOptions& options, std::vector<CheckResult>& out) {
    double max_dev = 0.0;
    std::string detail;
    for (int sites : {2, 3, 8, 20}) {
        for (int r : {1, 2, 4, 16, 24}) {
            Mapping mapping = MpsMapping::init(sites, r, options.seed);
            const auto enumerated = collect_mapping_params(mapping).size();
            const auto counted = count_mapping_params(mapping);
            max_dev = std::max(max_dev,
                               std::fabs(static_cast<double>(enumerated) -
                                         static_cast<double>(counted)));
        }
    }
    for (int dim : {5, 14, 20}) {
        for (int hidden : {1, 13, 20}) {
            Mapping mapping = MlpMapping::init(dim, hidden, options.seed);
            const auto enumerated = collect_mapping_params(mapping).size();
            const auto counted = count_mapping_params(mapping);
            max_dev = std::max(max_dev,
                               std::fabs(static_cast<double>(enumerated) -
                                         static_cast<double>(counted)));
        }
    }
    if (options.inject_failure)
        max_dev += 1.0;
    out.push_back(make_result("param-count-vs-enumeration", max_dev, 0.0,
                              "closed form equals optimizer-visible entries"));
}

} // namespace

std::vector<CheckResult> run_verify_suite(const std::string& suite, const SuiteOptions& options) {
    std::vector<CheckResult> results;
    const bool all = suite == "all";
    bool known = all;
    if (all || suite == "distributed") {
        known = true;
        check_state_norms(options, results);
        check_distributed_equivalence(options, results);
        check_periodicity(options, results);
    }
    if (all || suite == "gradients") {
        known = true;
        check_adjoint_vs_shift(options, results);
        check_qnn_fd(options, results);
        check_mapping_fd(options, /*use_mps=*/true, results);
        check_mapping_fd(options, /*use_mps=*/false, results);
        check_target_fd(options, results);
        check_end_to_end_fd(options, results);
    }
    if (all || suite == "mps-oracle") {
        known = true;
        check_contract_vs_dense(options, results);
        check_multilinearity(options, results);
        check_param_enumeration(options, results);
    }
    if (!known)
        throw ConfigError("unknown verify suite '" + suite +
                          "' (expected gradients | distributed | mps-oracle | all)");
    return results;
}

bool all_passed(const std::vector<CheckResult>& results) {
    for (const auto& r : results)
        if (!r.pass)
            return false;
    return true;
}

} // namespace qtrain
