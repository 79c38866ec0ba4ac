#include "qtrain/circuit.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "qtrain/errors.hpp"
#include "qtrain/rng.hpp"

namespace qtrain {

namespace {

constexpr double kPi = 3.14159265358979323846;

std::size_t dim_of(int n_qubits) { return std::size_t{1} << n_qubits; }

// Bit position of `qubit` counted from the least significant end of the
// index; qubit 0 is the most significant bit.
int bit_pos(int n_qubits, int qubit) { return n_qubits - 1 - qubit; }

void check_shape(int n_qubits, int layers, std::span<const double> angles) {
    if (n_qubits < 1)
        throw ConfigError("simulate: n_qubits must be >= 1, got " + std::to_string(n_qubits));
    if (layers < 0)
        throw ConfigError("simulate: layers must be >= 0, got " + std::to_string(layers));
    const std::size_t expected = static_cast<std::size_t>(layers) * n_qubits;
    if (angles.size() != expected)
        throw ConfigError("simulate: expected " + std::to_string(expected) + " angles (" +
                          std::to_string(layers) + " layers x " + std::to_string(n_qubits) +
                          " qubits), got " + std::to_string(angles.size()));
}

} // namespace

void CircuitSpec::validate() const {
    if (total_qubits < 1)
        throw ConfigError("circuit: total_qubits must be >= 1");
    if (layers < 0)
        throw ConfigError("circuit: layers must be >= 0");
    if (splits.empty())
        throw ConfigError("circuit: at least one sub-circuit required");
    for (int s : splits)
        if (s < 1)
            throw ConfigError("circuit: every split must be >= 1");
    const int sum = std::accumulate(splits.begin(), splits.end(), 0);
    if (sum != total_qubits)
        throw ConfigError("circuit: splits sum to " + std::to_string(sum) +
                          " but total_qubits = " + std::to_string(total_qubits));
}

ThetaParams ThetaParams::random(const CircuitSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(Rng::mix(seed, /*tag=*/0x7468657461ULL)); // stream tag: theta
    ThetaParams theta;
    theta.per_split.reserve(spec.splits.size());
    for (int n : spec.splits) {
        std::vector<double> block(static_cast<std::size_t>(spec.layers) * n);
        for (double& a : block)
            a = rng.uniform(-kPi, kPi);
        theta.per_split.push_back(std::move(block));
    }
    return theta;
}

std::size_t ThetaParams::total_count() const {
    std::size_t total = 0;
    for (const auto& block : per_split)
        total += block.size();
    return total;
}

void apply_ry(std::vector<double>& amp, int n_qubits, int qubit, double theta) {
    const double c = std::cos(0.5 * theta);
    const double s = std::sin(0.5 * theta);
    const std::size_t stride = std::size_t{1} << bit_pos(n_qubits, qubit);
    const std::size_t dim = dim_of(n_qubits);
    for (std::size_t base = 0; base < dim; base += 2 * stride) {
        for (std::size_t off = 0; off < stride; ++off) {
            const std::size_t i0 = base + off;
            const std::size_t i1 = i0 + stride;
            const double a0 = amp[i0];
            const double a1 = amp[i1];
            amp[i0] = c * a0 - s * a1;
            amp[i1] = s * a0 + c * a1;
        }
    }
}

void apply_cnot(std::vector<double>& amp, int n_qubits, int control, int target) {
    const std::size_t cmask = std::size_t{1} << bit_pos(n_qubits, control);
    const std::size_t tmask = std::size_t{1} << bit_pos(n_qubits, target);
    const std::size_t dim = dim_of(n_qubits);
    for (std::size_t i = 0; i < dim; ++i) {
        if ((i & cmask) && !(i & tmask))
            std::swap(amp[i], amp[i | tmask]);
    }
}

StateVector simulate_subcircuit(int n_qubits, int layers, std::span<const double> angles) {
    check_shape(n_qubits, layers, angles);
    StateVector state;
    state.qubits = n_qubits;
    state.amp.assign(dim_of(n_qubits), 0.0);
    state.amp[0] = 1.0;
    for (int l = 0; l < layers; ++l) {
        for (int q = 0; q < n_qubits; ++q)
            apply_ry(state.amp, n_qubits, q, angles[static_cast<std::size_t>(l) * n_qubits + q]);
        for (int i = 0; i + 1 < n_qubits; ++i)
            apply_cnot(state.amp, n_qubits, i, i + 1);
    }
    return state;
}

ProbVector probabilities(const StateVector& state) {
    ProbVector out;
    out.p.resize(state.amp.size());
    for (std::size_t i = 0; i < state.amp.size(); ++i)
        out.p[i] = state.amp[i] * state.amp[i];
    return out;
}

ProbVector combine_distributed(const std::vector<ProbVector>& sub_probs) {
    if (sub_probs.empty())
        throw ConfigError("combine_distributed: empty sub-circuit list");
    ProbVector combined = sub_probs.front();
    for (std::size_t j = 1; j < sub_probs.size(); ++j) {
        const auto& factor = sub_probs[j].p;
        std::vector<double> next(combined.p.size() * factor.size());
        std::size_t k = 0;
        for (double lhs : combined.p)
            for (double rhs : factor)
                next[k++] = lhs * rhs;
        combined.p = std::move(next);
    }
    return combined;
}

std::vector<double> adjoint_gradient(int n_qubits, int layers,
                                     std::span<const double> angles,
                                     std::span<const double> upstream) {
    check_shape(n_qubits, layers, angles);
    if (upstream.size() != dim_of(n_qubits))
        throw ConfigError("adjoint_gradient: upstream length " + std::to_string(upstream.size()) +
                          " != 2^" + std::to_string(n_qubits));

    StateVector state = simulate_subcircuit(n_qubits, layers, angles);

    // lambda = dLoss/d amp on the final state; phi is rewound to sit just
    // before each gate as the reverse sweep visits it. All gates here are
    // real and orthogonal, so the transpose equals the inverse.
    std::vector<double> lambda(state.amp.size());
    for (std::size_t i = 0; i < lambda.size(); ++i)
        lambda[i] = 2.0 * upstream[i] * state.amp[i];
    std::vector<double>& phi = state.amp;

    std::vector<double> grad(angles.size(), 0.0);
    for (int l = layers - 1; l >= 0; --l) {
        for (int i = n_qubits - 2; i >= 0; --i) {
            apply_cnot(phi, n_qubits, i, i + 1);
            apply_cnot(lambda, n_qubits, i, i + 1);
        }
        for (int q = n_qubits - 1; q >= 0; --q) {
            const std::size_t a_idx = static_cast<std::size_t>(l) * n_qubits + q;
            const double theta = angles[a_idx];
            apply_ry(phi, n_qubits, q, -theta);

            // grad = lambda^T (dRy/dtheta) phi over every amplitude pair.
            const double c = std::cos(0.5 * theta);
            const double s = std::sin(0.5 * theta);
            const std::size_t stride = std::size_t{1} << bit_pos(n_qubits, q);
            double g = 0.0;
            for (std::size_t base = 0; base < phi.size(); base += 2 * stride) {
                for (std::size_t off = 0; off < stride; ++off) {
                    const std::size_t i0 = base + off;
                    const std::size_t i1 = i0 + stride;
                    const double d0 = 0.5 * (-s * phi[i0] - c * phi[i1]);
                    const double d1 = 0.5 * (c * phi[i0] - s * phi[i1]);
                    g += lambda[i0] * d0 + lambda[i1] * d1;
                }
            }
            grad[a_idx] = g;
            apply_ry(lambda, n_qubits, q, -theta);
        }
    }
    return grad;
}

namespace {

double weighted_probability(int n_qubits, int layers, std::span<const double> angles,
                            std::span<const double> upstream) {
    const StateVector state = simulate_subcircuit(n_qubits, layers, angles);
    double loss = 0.0;
    for (std::size_t i = 0; i < state.amp.size(); ++i)
        loss += upstream[i] * state.amp[i] * state.amp[i];
    return loss;
}

} // namespace

std::vector<double> parameter_shift_gradient(int n_qubits, int layers,
                                             std::span<const double> angles,
                                             std::span<const double> upstream) {
    check_shape(n_qubits, layers, angles);
    if (upstream.size() != dim_of(n_qubits))
        throw ConfigError("parameter_shift_gradient: upstream length " +
                          std::to_string(upstream.size()) + " != 2^" + std::to_string(n_qubits));

    std::vector<double> shifted(angles.begin(), angles.end());
    std::vector<double> grad(angles.size());
    for (std::size_t k = 0; k < shifted.size(); ++k) {
        const double original = shifted[k];
        shifted[k] = original + 0.5 * kPi;
        const double plus = weighted_probability(n_qubits, layers, shifted, upstream);
        shifted[k] = original - 0.5 * kPi;
        const double minus = weighted_probability(n_qubits, layers, shifted, upstream);
        shifted[k] = original;
        grad[k] = 0.5 * (plus - minus);
    }
    return grad;
}

} // namespace qtrain
