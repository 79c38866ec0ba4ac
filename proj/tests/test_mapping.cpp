#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qtrain/config.hpp"
#include "qtrain/errors.hpp"
#include "qtrain/mapping.hpp"
#include "qtrain/rng.hpp"

using namespace qtrain;

namespace {

MpsMapping constant_mps(int sites, int bond_dim, double value) {
    MpsMapping m = MpsMapping::init(sites, bond_dim, 0);
    for (double& v : m.first)
        v = value;
    for (auto& t : m.middle)
        for (double& v : t)
            v = value;
    for (double& v : m.last)
        v = value;
    return m;
}

ProbVector uniform_probs(int n_qubits) {
    ProbVector p;
    p.p.assign(std::size_t{1} << n_qubits, std::ldexp(1.0, -n_qubits));
    return p;
}

} // namespace

TEST_CASE("basis_bits follows the most-significant-bit-first convention") {
    CHECK(basis_bits(0, 3) == std::vector<std::uint8_t>{0, 0, 0});
    CHECK(basis_bits(5, 3) == std::vector<std::uint8_t>{1, 0, 1});
    CHECK(basis_bits((1u << 4) - 1, 4) == std::vector<std::uint8_t>{1, 1, 1, 1});
    CHECK_THROWS_AS(basis_bits(8, 3), DomainError);
}

TEST_CASE("feature map embeds coordinates as [x, 1-x]") {
    CHECK(feature_pair(0.0) == std::array<double, 2>{0.0, 1.0});
    CHECK(feature_pair(1.0) == std::array<double, 2>{1.0, 0.0});
    const auto pair = feature_pair(0.3);
    CHECK(pair[0] == Catch::Approx(0.3));
    CHECK(pair[1] == Catch::Approx(0.7));
    CHECK_THROWS_AS(feature_pair(-0.01), DomainError);
    CHECK_THROWS_AS(feature_pair(1.01), DomainError);
}

TEST_CASE("all-ones rank-1 MPS contracts to 1 and all-zero to 0") {
    const MpsMapping ones = constant_mps(6, 1, 1.0);
    const MpsMapping zeros = constant_mps(6, 1, 0.0);
    Rng rng(5);
    for (int t = 0; t < 10; ++t) {
        std::vector<double> coords(6);
        for (double& c : coords)
            c = rng.uniform();
        CHECK(mps_contract(ones, coords) == Catch::Approx(1.0).margin(1e-12));
        CHECK(mps_contract(zeros, coords) == 0.0);
    }
}

TEST_CASE("mps_contract matches the dense oracle") {
    Rng rng(17);
    const MpsMapping mapping = MpsMapping::init(6, 3, rng.next_u64());
    const std::vector<double> w = dense_oracle(mapping);
    REQUIRE(w.size() == 64);
    for (int t = 0; t < 20; ++t) {
        std::vector<double> coords(6);
        for (double& c : coords)
            c = rng.uniform();
        double slow = 0.0;
        for (std::size_t idx = 0; idx < w.size(); ++idx) {
            double factor = 1.0;
            for (int j = 0; j < 6; ++j) {
                const int bit = static_cast<int>((idx >> (5 - j)) & 1u);
                factor *= bit == 0 ? coords[static_cast<std::size_t>(j)]
                                   : 1.0 - coords[static_cast<std::size_t>(j)];
            }
            slow += w[idx] * factor;
        }
        CHECK(mps_contract(mapping, coords) == Catch::Approx(slow).margin(1e-10));
    }
}

TEST_CASE("dense oracle edge cases and explicit bond-sum reconstruction") {
    const MpsMapping tiny = constant_mps(2, 1, 1.0);
    const auto w = dense_oracle(tiny);
    REQUIRE(w.size() == 4);
    for (double v : w)
        CHECK(v == Catch::Approx(1.0));

    CHECK_THROWS_AS(MpsMapping::init(1, 2, 0), ConfigError);
    MpsMapping huge = MpsMapping::init(17, 1, 0);
    CHECK_THROWS_AS(dense_oracle(huge), ConfigError);

    // sites = 5, r = 2: brute-force sum over all bond index tuples.
    const MpsMapping mapping = MpsMapping::init(5, 2, 99);
    const auto dense = dense_oracle(mapping);
    const int r = 2;
    for (std::size_t idx = 0; idx < dense.size(); ++idx) {
        int s[5];
        for (int j = 0; j < 5; ++j)
            s[j] = static_cast<int>((idx >> (4 - j)) & 1u);
        double total = 0.0;
        for (int a1 = 0; a1 < r; ++a1)
            for (int a2 = 0; a2 < r; ++a2)
                for (int a3 = 0; a3 < r; ++a3)
                    for (int a4 = 0; a4 < r; ++a4)
                        total += mapping.first[s[0] * r + a1] *
                                 mapping.middle[0][(a1 * 2 + s[1]) * r + a2] *
                                 mapping.middle[1][(a2 * 2 + s[2]) * r + a3] *
                                 mapping.middle[2][(a3 * 2 + s[3]) * r + a4] *
                                 mapping.last[a4 * 2 + s[4]];
        CHECK(dense[idx] == Catch::Approx(total).margin(1e-12));
    }
}

TEST_CASE("mapping input construction scales and clamps the probability coordinate") {
    ProbVector probs;
    probs.p = {0.5, 0.25, 0.125, 0.125}; // N = 2, scale = 4
    const MappingInputs scaled = build_mapping_inputs(probs, 3, true);
    REQUIRE(scaled.sites == 3);
    REQUIRE(scaled.count == 3);
    // Basis bits of indices 0, 1, 2: (0,0), (0,1), (1,0).
    CHECK(scaled.coords[0] == 0.0);
    CHECK(scaled.coords[1] == 0.0);
    CHECK(scaled.coords[3] == 0.0);
    CHECK(scaled.coords[4] == 1.0);
    CHECK(scaled.coords[6] == 1.0);
    CHECK(scaled.coords[7] == 0.0);
    // p = 0.5 scales to 2.0 and clamps with zero gradient.
    CHECK(scaled.coords[2] == 1.0);
    CHECK(scaled.prob_grad_scale[0] == 0.0);
    // p = 0.25 scales exactly to 1.0 (boundary kept differentiable).
    CHECK(scaled.coords[5] == 1.0);
    CHECK(scaled.prob_grad_scale[1] == 4.0);
    CHECK(scaled.coords[8] == 0.5);
    CHECK(scaled.prob_grad_scale[2] == 4.0);

    const MappingInputs raw = build_mapping_inputs(probs, 3, false);
    CHECK(raw.coords[2] == 0.5);
    CHECK(raw.prob_grad_scale[0] == 1.0);

    CHECK_THROWS_AS(build_mapping_inputs(probs, 5, true), ConfigError);
}

TEST_CASE("generate_weights composes basis bits with contractions") {
    const Mapping ones = constant_mps(2, 1, 1.0);
    ProbVector p1;
    p1.p = {0.3, 0.7};
    const WeightVector w1 = generate_weights(ones, p1, 1, true);
    REQUIRE(w1.omega.size() == 1);
    CHECK(w1.omega[0] == Catch::Approx(1.0).margin(1e-12));

    // Random instance: every output equals a manual per-index contraction.
    Rng rng(123);
    const int n = 4;
    const MpsMapping mapping = MpsMapping::init(n + 1, 2, rng.next_u64());
    ProbVector probs;
    probs.p.resize(16);
    double sum = 0.0;
    for (double& p : probs.p) {
        p = rng.uniform();
        sum += p;
    }
    for (double& p : probs.p)
        p /= sum;
    const std::size_t m = 10;
    const WeightVector w = generate_weights(Mapping{mapping}, probs, m, true);
    REQUIRE(w.omega.size() == m);
    for (std::size_t i = 0; i < m; ++i) {
        std::vector<double> coords;
        for (std::uint8_t bit : basis_bits(i, n))
            coords.push_back(bit);
        coords.push_back(std::min(1.0, probs.p[i] * 16.0));
        CHECK(w.omega[i] == Catch::Approx(mps_contract(mapping, coords)).margin(1e-14));
    }
}

TEST_CASE("generate_weights is bitwise deterministic") {
    Rng rng(7);
    const Mapping mapping = MpsMapping::init(5, 3, rng.next_u64());
    ProbVector probs = uniform_probs(4);
    const WeightVector a = generate_weights(mapping, probs, 12, true);
    const WeightVector b = generate_weights(mapping, probs, 12, true);
    CHECK(a.omega == b.omega);
}

TEST_CASE("mps backprop gradients: trivial cases and finite differences") {
    Rng rng(31);

    // Zero upstream kills every gradient.
    Mapping mapping = MpsMapping::init(6, 3, rng.next_u64());
    ProbVector probs = uniform_probs(5);
    const MappingInputs inputs = build_mapping_inputs(probs, 8, true);
    const std::vector<double> zero(8, 0.0);
    const MappingBackprop zero_bp = mapping_backprop(mapping, inputs, zero);
    for (double g : zero_bp.param_grad)
        CHECK(g == 0.0);
    for (double g : zero_bp.prob_grad)
        CHECK(g == 0.0);

    // Constant rank-1 mapping: output is 1 everywhere, so the probability
    // coordinate has no influence.
    Mapping ones = constant_mps(6, 1, 1.0);
    const std::vector<double> upstream_ones(8, 1.0);
    const MappingBackprop flat_bp = mapping_backprop(ones, inputs, upstream_ones);
    for (double g : flat_bp.prob_grad)
        CHECK(g == Catch::Approx(0.0).margin(1e-14));

    // Random instance vs central finite differences.
    std::vector<double> upstream(8);
    for (double& u : upstream)
        u = rng.uniform(-1.0, 1.0);
    const MappingBackprop bp = mapping_backprop(mapping, inputs, upstream);
    auto loss_at = [&]() {
        const WeightVector w = map_weights(mapping, inputs);
        double loss = 0.0;
        for (std::size_t i = 0; i < upstream.size(); ++i)
            loss += upstream[i] * w.omega[i];
        return loss;
    };
    const auto params = collect_mapping_params(mapping);
    REQUIRE(params.size() == bp.param_grad.size());
    const double h = 1e-6;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double saved = *params[k];
        *params[k] = saved + h;
        const double fp = loss_at();
        *params[k] = saved - h;
        const double fm = loss_at();
        *params[k] = saved;
        const double fd = (fp - fm) / (2.0 * h);
        CHECK(std::fabs(bp.param_grad[k] - fd) / std::max(std::fabs(fd), 1e-8) < 1e-5);
    }
}

TEST_CASE("mlp mapping forward and backprop") {
    MlpMapping mlp = MlpMapping::init(5, 4, 3);
    for (double& v : mlp.w1)
        v = 0.0;
    for (double& v : mlp.w2)
        v = 0.0;
    for (double& v : mlp.w3)
        v = 0.0;
    std::fill(mlp.b1.begin(), mlp.b1.end(), 0.0);
    std::fill(mlp.b2.begin(), mlp.b2.end(), 0.0);
    mlp.b3[0] = 0.0;
    const std::vector<double> coords{0.1, 0.9, 0.5, 0.0, 1.0};
    CHECK(mlp_map_forward(mlp, coords) == 0.0);
    mlp.b3[0] = 2.5;
    CHECK(mlp_map_forward(mlp, coords) == Catch::Approx(2.5));

    // Random instance vs finite differences.
    Rng rng(77);
    Mapping mapping = MlpMapping::init(5, 4, rng.next_u64());
    ProbVector probs = uniform_probs(4);
    const MappingInputs inputs = build_mapping_inputs(probs, 6, true);
    std::vector<double> upstream(6);
    for (double& u : upstream)
        u = rng.uniform(-1.0, 1.0);
    const MappingBackprop bp = mapping_backprop(mapping, inputs, upstream);
    auto loss_at = [&]() {
        const WeightVector w = map_weights(mapping, inputs);
        double loss = 0.0;
        for (std::size_t i = 0; i < upstream.size(); ++i)
            loss += upstream[i] * w.omega[i];
        return loss;
    };
    const auto params = collect_mapping_params(mapping);
    const double h = 1e-6;
    for (std::size_t k = 0; k < params.size(); ++k) {
        const double saved = *params[k];
        *params[k] = saved + h;
        const double fp = loss_at();
        *params[k] = saved - h;
        const double fm = loss_at();
        *params[k] = saved;
        const double fd = (fp - fm) / (2.0 * h);
        CHECK(std::fabs(bp.param_grad[k] - fd) / std::max(std::fabs(fd), 1e-8) < 1e-5);
    }
}

TEST_CASE("mapping parameter counts match the closed forms and the enumeration") {
    const MpsMapping wide = MpsMapping::init(20, 2, 0);
    CHECK(wide.param_count() == 152); // 4 * 2 + 2 * 4 * 18

    const MpsMapping tiny = MpsMapping::init(2, 1, 0);
    CHECK(tiny.param_count() == 4);

    CHECK(ceil_log2(285226) == 19);

    for (int sites : {2, 5, 14}) {
        for (int r : {1, 3, 4}) {
            Mapping mapping = MpsMapping::init(sites, r, 1);
            CHECK(count_mapping_params(mapping) == collect_mapping_params(mapping).size());
        }
    }
    for (int dim : {3, 14}) {
        for (int h : {2, 13, 20}) {
            Mapping mapping = MlpMapping::init(dim, h, 1);
            const std::size_t expected = static_cast<std::size_t>(dim) * h + h +
                                         static_cast<std::size_t>(h) * h + h + h + 1;
            CHECK(count_mapping_params(mapping) == expected);
            CHECK(collect_mapping_params(mapping).size() == expected);
        }
    }
}

TEST_CASE("mps_contract is affine in each coordinate") {
    Rng rng(41);
    for (int t = 0; t < 25; ++t) {
        const int sites = 2 + static_cast<int>(rng.below(6));
        const MpsMapping mapping =
            MpsMapping::init(sites, 1 + static_cast<int>(rng.below(4)), rng.next_u64());
        std::vector<double> coords(static_cast<std::size_t>(sites));
        for (double& c : coords)
            c = rng.uniform();
        const std::size_t j = rng.below(static_cast<std::uint64_t>(sites));
        const double x = rng.uniform();
        coords[j] = 0.0;
        const double at_0 = mps_contract(mapping, coords);
        coords[j] = 1.0;
        const double at_1 = mps_contract(mapping, coords);
        coords[j] = x;
        CHECK(mps_contract(mapping, coords) ==
              Catch::Approx(at_0 + x * (at_1 - at_0)).margin(1e-10));
    }
}
