#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <variant>
#include <vector>

#include "qtrain/circuit.hpp"

namespace qtrain {

/// Generated weight vector of the target network.
struct WeightVector {
    std::vector<double> omega;
};

/// Bits of basis state `index` under the fixed ordering: bit 0 (qubit 0) is
/// the most significant bit.
std::vector<std::uint8_t> basis_bits(std::uint64_t index, int n_qubits);

/// Per-coordinate embedding x -> [x, 1 - x]. Throws DomainError outside [0, 1].
std::array<double, 2> feature_pair(double x);
std::vector<std::array<double, 2>> feature_map(std::span<const double> coords);

/// Matrix product state over `sites` binary-feature legs with a scalar
/// output: one (2, r) boundary, sites - 2 interior (r, 2, r) tensors, and an
/// (r, 2) boundary. Trainable parameter count is 4r + 2r^2 (sites - 2).
struct MpsMapping {
    int sites = 0;
    int bond_dim = 0;
    std::vector<double> first;                // (2, r): first[s * r + a]
    std::vector<std::vector<double>> middle;  // each (r, 2, r): t[(a * 2 + s) * r + b]
    std::vector<double> last;                 // (r, 2): last[a * 2 + s]

    static MpsMapping init(int sites, int bond_dim, std::uint64_t seed);
    std::size_t param_count() const;
    void validate() const;
};

/// Baseline MLP mapping with layer sizes [input_dim, hidden, hidden, 1],
/// tanh on the hidden layers and an identity output.
struct MlpMapping {
    int input_dim = 0;
    int hidden = 0;
    std::vector<double> w1, b1; // (hidden, input_dim), (hidden)
    std::vector<double> w2, b2; // (hidden, hidden), (hidden)
    std::vector<double> w3, b3; // (1, hidden), (1)

    static MlpMapping init(int input_dim, int hidden, std::uint64_t seed);
    std::size_t param_count() const;
    void validate() const;
};

using Mapping = std::variant<MpsMapping, MlpMapping>;

std::size_t count_mapping_params(const Mapping& mapping);
int mapping_input_dim(const Mapping& mapping);

/// Ordered list of every trainable entry, the exact enumeration the
/// optimizer iterates. Gradients from mapping_backprop use the same order.
std::vector<double*> collect_mapping_params(Mapping& mapping);
std::vector<const double*> collect_mapping_params(const Mapping& mapping);

/// W . Xi(x): contract each site with its feature two-vector, then multiply
/// the bond factors left to right.
double mps_contract(const MpsMapping& mapping, std::span<const std::array<double, 2>> features);
double mps_contract(const MpsMapping& mapping, std::span<const double> coords);

/// Explicit reconstruction of the full tensor W with 2^sites entries,
/// index big-endian in the site order. Test oracle; refuses sites > 16.
std::vector<double> dense_oracle(const MpsMapping& mapping);

double mlp_map_forward(const MlpMapping& mapping, std::span<const double> coords);

/// The m mapping inputs derived from a measurement distribution: basis bits
/// plus the (optionally rescaled) probability coordinate, and the factor
/// d(coordinate)/d(raw probability) used by the backward pass.
struct MappingInputs {
    int sites = 0;
    std::size_t count = 0;
    std::vector<double> coords;          // count x sites, row-major
    std::vector<double> prob_grad_scale; // per input

    std::span<const double> input(std::size_t i) const {
        return {coords.data() + i * sites, static_cast<std::size_t>(sites)};
    }
};

MappingInputs build_mapping_inputs(const ProbVector& probs, std::size_t m, bool prob_scale);

/// omega_i = G(basis bits of i, p_i) for i = 0 .. m-1.
WeightVector map_weights(const Mapping& mapping, const MappingInputs& inputs);
WeightVector generate_weights(const Mapping& mapping, const ProbVector& probs, std::size_t m,
                              bool prob_scale);

/// Exact gradients of Loss = sum_i upstream_i * omega_i with respect to every
/// mapping parameter (flat, in collect_mapping_params order) and to each
/// input's raw probability.
struct MappingBackprop {
    std::vector<double> param_grad;
    std::vector<double> prob_grad;
};

MappingBackprop mapping_backprop(const Mapping& mapping, const MappingInputs& inputs,
                                 std::span<const double> upstream);

} // namespace qtrain
