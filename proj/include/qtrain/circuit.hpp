#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace qtrain {

/// Geometry of the ansatz: total qubit count, the partition into independent
/// sub-circuits (most-significant block first), and the block repetition
/// count shared by all sub-circuits.
struct CircuitSpec {
    int total_qubits = 0;
    std::vector<int> splits;
    int layers = 0;

    void validate() const; // throws ConfigError
};

/// Rotation angles, one layers x n_j block per sub-circuit, layer-major.
struct ThetaParams {
    std::vector<std::vector<double>> per_split;

    static ThetaParams random(const CircuitSpec& spec, std::uint64_t seed);
    std::size_t total_count() const;
};

/// Index convention used throughout: qubit 0 is the most significant bit of
/// the basis index, and in a distributed circuit the first sub-circuit owns
/// the most significant bit block.
enum class BitOrder { MsbFirst };

struct StateVector {
    int qubits = 0;
    std::vector<double> amp; // length 2^qubits; the ansatz keeps amplitudes real
};

struct ProbVector {
    std::vector<double> p;
    BitOrder order = BitOrder::MsbFirst;
};

/// In-place gate kernels. Exposed so oracle code can compose circuits
/// directly on a full register.
void apply_ry(std::vector<double>& amp, int n_qubits, int qubit, double theta);
void apply_cnot(std::vector<double>& amp, int n_qubits, int control, int target);

/// Runs the real-amplitude ansatz on one sub-circuit: per block, a rotation
/// on every qubit followed by the ascending CNOT chain, repeated `layers`
/// times. `angles` is layer-major with layers * n_qubits entries.
StateVector simulate_subcircuit(int n_qubits, int layers, std::span<const double> angles);

/// Measurement distribution of a state: entry i = amplitude_i^2.
ProbVector probabilities(const StateVector& state);

/// Kronecker product of sub-circuit distributions, taken in list order (the
/// first factor owns the most significant bits of the combined index).
ProbVector combine_distributed(const std::vector<ProbVector>& sub_probs);

/// Exact gradient of Loss = sum_i upstream_i * p_i(theta) with respect to
/// every rotation angle, via a reverse sweep with transposed gates.
/// Returns a layer-major layers * n_qubits vector.
std::vector<double> adjoint_gradient(int n_qubits, int layers,
                                     std::span<const double> angles,
                                     std::span<const double> upstream);

/// Same quantity as adjoint_gradient computed from +-pi/2 shifted circuit
/// evaluations; kept as an independent verification path.
std::vector<double> parameter_shift_gradient(int n_qubits, int layers,
                                             std::span<const double> angles,
                                             std::span<const double> upstream);

} // namespace qtrain
