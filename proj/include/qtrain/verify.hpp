#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "qtrain/circuit.hpp"

namespace qtrain {

struct CheckResult {
    std::string name;
    bool pass = false;
    double max_dev = 0.0;
    double tolerance = 0.0;
    std::string detail;
};

struct SuiteOptions {
    std::uint64_t seed = 0;
    int trials = 0;             // 0 = suite default
    bool inject_failure = false; // corrupts one comparison, for exercising the reporting path
};

/// Oracle for the distributed ansatz: all sub-circuits simulated on a single
/// register with no cross-register gates.
ProbVector monolithic_disjoint_probs(const CircuitSpec& spec, const ThetaParams& theta);

/// Suites: "distributed" (norms, Kronecker equivalence, periodicity),
/// "gradients" (adjoint vs shift vs finite differences, mapping/target/
/// end-to-end backprop), "mps-oracle" (contraction vs dense reconstruction,
/// multilinearity, parameter enumeration), or "all".
std::vector<CheckResult> run_verify_suite(const std::string& suite, const SuiteOptions& options);

bool all_passed(const std::vector<CheckResult>& results);

} // namespace qtrain
