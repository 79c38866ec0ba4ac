#include "qtrain/mapping.hpp"

#include <cmath>
#include <string>

#include "qtrain/errors.hpp"
#include "qtrain/rng.hpp"

namespace qtrain {

std::vector<std::uint8_t> basis_bits(std::uint64_t index, int n_qubits) {
    if (n_qubits < 1 || n_qubits > 63)
        throw DomainError("basis_bits: n_qubits out of range: " + std::to_string(n_qubits));
    if (index >= (std::uint64_t{1} << n_qubits))
        throw DomainError("basis_bits: index " + std::to_string(index) + " out of range for " +
                          std::to_string(n_qubits) + " qubits");
    std::vector<std::uint8_t> bits(n_qubits);
    for (int q = 0; q < n_qubits; ++q)
        bits[q] = static_cast<std::uint8_t>((index >> (n_qubits - 1 - q)) & 1u);
    return bits;
}

std::array<double, 2> feature_pair(double x) {
    if (!(x >= 0.0 && x <= 1.0))
        throw DomainError("feature_map: coordinate " + std::to_string(x) + " outside [0, 1]");
    return {x, 1.0 - x};
}

std::vector<std::array<double, 2>> feature_map(std::span<const double> coords) {
    std::vector<std::array<double, 2>> features;
    features.reserve(coords.size());
    for (double x : coords)
        features.push_back(feature_pair(x));
    return features;
}

MpsMapping MpsMapping::init(int sites, int bond_dim, std::uint64_t seed) {
    if (sites < 2)
        throw ConfigError("mps: at least 2 sites required, got " + std::to_string(sites));
    if (bond_dim < 1)
        throw ConfigError("mps: bond_dim must be >= 1, got " + std::to_string(bond_dim));

    Rng rng(Rng::mix(seed, /*tag=*/0x6d7073ULL)); // stream tag: mps
    const int r = bond_dim;
    const double boundary_scale = 1.0 / std::sqrt(static_cast<double>(r));
    const double noise_scale = 0.5 / std::sqrt(static_cast<double>(r));

    MpsMapping m;
    m.sites = sites;
    m.bond_dim = r;
    m.first.resize(2 * static_cast<std::size_t>(r));
    for (double& v : m.first)
        v = rng.normal(boundary_scale);

    // Interior tensors start as the identity on the bond indices plus noise,
    // so left-to-right products stay order one across many sites.
    m.middle.resize(static_cast<std::size_t>(sites) - 2);
    for (auto& tensor : m.middle) {
        tensor.assign(static_cast<std::size_t>(r) * 2 * r, 0.0);
        for (int a = 0; a < r; ++a)
            for (int s = 0; s < 2; ++s)
                for (int b = 0; b < r; ++b) {
                    double v = (a == b) ? 1.0 : 0.0;
                    tensor[(static_cast<std::size_t>(a) * 2 + s) * r + b] =
                        v + rng.normal(noise_scale);
                }
    }

    m.last.resize(static_cast<std::size_t>(r) * 2);
    for (double& v : m.last)
        v = rng.normal(boundary_scale);
    return m;
}

std::size_t MpsMapping::param_count() const {
    const std::size_t r = static_cast<std::size_t>(bond_dim);
    return 4 * r + 2 * r * r * (static_cast<std::size_t>(sites) - 2);
}

void MpsMapping::validate() const {
    if (sites < 2 || bond_dim < 1)
        throw ConfigError("mps: invalid geometry");
    const std::size_t r = static_cast<std::size_t>(bond_dim);
    if (first.size() != 2 * r || last.size() != 2 * r ||
        middle.size() != static_cast<std::size_t>(sites) - 2)
        throw ConfigError("mps: tensor shapes inconsistent with geometry");
    for (const auto& t : middle)
        if (t.size() != 2 * r * r)
            throw ConfigError("mps: interior tensor shape mismatch");
}

MlpMapping MlpMapping::init(int input_dim, int hidden, std::uint64_t seed) {
    if (input_dim < 1 || hidden < 1)
        throw ConfigError("mlp: input_dim and hidden must be >= 1");
    Rng rng(Rng::mix(seed, /*tag=*/0x6d6c70ULL)); // stream tag: mlp
    MlpMapping m;
    m.input_dim = input_dim;
    m.hidden = hidden;
    auto fill = [&rng](std::vector<double>& w, std::size_t n, int fan_in) {
        w.resize(n);
        const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& v : w)
            v = rng.normal(scale);
    };
    fill(m.w1, static_cast<std::size_t>(hidden) * input_dim, input_dim);
    m.b1.assign(hidden, 0.0);
    fill(m.w2, static_cast<std::size_t>(hidden) * hidden, hidden);
    m.b2.assign(hidden, 0.0);
    fill(m.w3, static_cast<std::size_t>(hidden), hidden);
    m.b3.assign(1, 0.0);
    return m;
}

std::size_t MlpMapping::param_count() const {
    const std::size_t h = static_cast<std::size_t>(hidden);
    const std::size_t in = static_cast<std::size_t>(input_dim);
    return in * h + h + h * h + h + h + 1;
}

void MlpMapping::validate() const {
    const std::size_t h = static_cast<std::size_t>(hidden);
    if (input_dim < 1 || hidden < 1)
        throw ConfigError("mlp: invalid geometry");
    if (w1.size() != h * static_cast<std::size_t>(input_dim) || b1.size() != h ||
        w2.size() != h * h || b2.size() != h || w3.size() != h || b3.size() != 1)
        throw ConfigError("mlp: weight shapes inconsistent with geometry");
}

std::size_t count_mapping_params(const Mapping& mapping) {
    return std::visit([](const auto& m) { return m.param_count(); }, mapping);
}

int mapping_input_dim(const Mapping& mapping) {
    if (const auto* mps = std::get_if<MpsMapping>(&mapping))
        return mps->sites;
    return std::get<MlpMapping>(mapping).input_dim;
}

std::vector<double*> collect_mapping_params(Mapping& mapping) {
    std::vector<double*> params;
    params.reserve(count_mapping_params(mapping));
    auto append = [&params](std::vector<double>& values) {
        for (double& v : values)
            params.push_back(&v);
    };
    if (auto* mps = std::get_if<MpsMapping>(&mapping)) {
        append(mps->first);
        for (auto& t : mps->middle)
            append(t);
        append(mps->last);
    } else {
        auto& mlp = std::get<MlpMapping>(mapping);
        append(mlp.w1);
        append(mlp.b1);
        append(mlp.w2);
        append(mlp.b2);
        append(mlp.w3);
        append(mlp.b3);
    }
    return params;
}

std::vector<const double*> collect_mapping_params(const Mapping& mapping) {
    auto mutable_params = collect_mapping_params(const_cast<Mapping&>(mapping));
    return {mutable_params.begin(), mutable_params.end()};
}

namespace {

void check_sites(const MpsMapping& mapping, std::size_t n_features) {
    if (n_features != static_cast<std::size_t>(mapping.sites))
        throw ConfigError("mps_contract: " + std::to_string(n_features) + " features for " +
                          std::to_string(mapping.sites) + " sites");
}

} // namespace

double mps_contract(const MpsMapping& mapping, std::span<const std::array<double, 2>> features) {
    check_sites(mapping, features.size());
    const int r = mapping.bond_dim;
    std::vector<double> left(r), next(r);
    for (int a = 0; a < r; ++a)
        left[a] = features[0][0] * mapping.first[a] + features[0][1] * mapping.first[r + a];

    for (std::size_t j = 0; j < mapping.middle.size(); ++j) {
        const auto& tensor = mapping.middle[j];
        const auto& xi = features[j + 1];
        std::fill(next.begin(), next.end(), 0.0);
        for (int a = 0; a < r; ++a) {
            const double w0 = left[a] * xi[0];
            const double w1 = left[a] * xi[1];
            const std::size_t row0 = static_cast<std::size_t>(a) * 2 * r;
            for (int b = 0; b < r; ++b)
                next[b] += w0 * tensor[row0 + b] + w1 * tensor[row0 + r + b];
        }
        std::swap(left, next);
    }

    const auto& xi_last = features[mapping.sites - 1];
    double out = 0.0;
    for (int a = 0; a < r; ++a)
        out += left[a] * (xi_last[0] * mapping.last[2 * a] + xi_last[1] * mapping.last[2 * a + 1]);
    return out;
}

double mps_contract(const MpsMapping& mapping, std::span<const double> coords) {
    return mps_contract(mapping, feature_map(coords));
}

std::vector<double> dense_oracle(const MpsMapping& mapping) {
    mapping.validate();
    if (mapping.sites > 16)
        throw ConfigError("dense_oracle: refusing " + std::to_string(mapping.sites) +
                          " sites (> 16 would materialize 2^" + std::to_string(mapping.sites) +
                          " entries)");
    const int r = mapping.bond_dim;
    const int sites = mapping.sites;
    std::vector<double> w(std::size_t{1} << sites);
    std::vector<double> row(r), next(r);
    for (std::size_t idx = 0; idx < w.size(); ++idx) {
        const int s0 = static_cast<int>((idx >> (sites - 1)) & 1u);
        for (int a = 0; a < r; ++a)
            row[a] = mapping.first[static_cast<std::size_t>(s0) * r + a];
        for (int j = 1; j <= sites - 2; ++j) {
            const int sj = static_cast<int>((idx >> (sites - 1 - j)) & 1u);
            const auto& tensor = mapping.middle[static_cast<std::size_t>(j) - 1];
            std::fill(next.begin(), next.end(), 0.0);
            for (int a = 0; a < r; ++a) {
                const double ra = row[a];
                const std::size_t base = (static_cast<std::size_t>(a) * 2 + sj) * r;
                for (int b = 0; b < r; ++b)
                    next[b] += ra * tensor[base + b];
            }
            std::swap(row, next);
        }
        const int s_last = static_cast<int>(idx & 1u);
        double value = 0.0;
        for (int a = 0; a < r; ++a)
            value += row[a] * mapping.last[static_cast<std::size_t>(a) * 2 + s_last];
        w[idx] = value;
    }
    return w;
}

double mlp_map_forward(const MlpMapping& mapping, std::span<const double> coords) {
    if (coords.size() != static_cast<std::size_t>(mapping.input_dim))
        throw ConfigError("mlp_map_forward: coordinate count mismatch");
    const int h = mapping.hidden;
    const int in = mapping.input_dim;
    std::vector<double> a1(h), a2(h);
    for (int i = 0; i < h; ++i) {
        double z = mapping.b1[i];
        for (int j = 0; j < in; ++j)
            z += mapping.w1[static_cast<std::size_t>(i) * in + j] * coords[j];
        a1[i] = std::tanh(z);
    }
    for (int i = 0; i < h; ++i) {
        double z = mapping.b2[i];
        for (int j = 0; j < h; ++j)
            z += mapping.w2[static_cast<std::size_t>(i) * h + j] * a1[j];
        a2[i] = std::tanh(z);
    }
    double out = mapping.b3[0];
    for (int j = 0; j < h; ++j)
        out += mapping.w3[j] * a2[j];
    return out;
}

MappingInputs build_mapping_inputs(const ProbVector& probs, std::size_t m, bool prob_scale) {
    const std::size_t dim = probs.p.size();
    if (dim == 0 || (dim & (dim - 1)) != 0)
        throw ConfigError("mapping inputs: probability vector length " + std::to_string(dim) +
                          " is not a power of two");
    if (m > dim)
        throw ConfigError("mapping inputs: m = " + std::to_string(m) + " exceeds 2^N = " +
                          std::to_string(dim));
    int n_qubits = 0;
    while ((std::size_t{1} << n_qubits) < dim)
        ++n_qubits;

    MappingInputs inputs;
    inputs.sites = n_qubits + 1;
    inputs.count = m;
    inputs.coords.resize(m * static_cast<std::size_t>(inputs.sites));
    inputs.prob_grad_scale.resize(m);
    const double scale = std::ldexp(1.0, n_qubits); // 2^N
    for (std::size_t i = 0; i < m; ++i) {
        double* row = inputs.coords.data() + i * inputs.sites;
        for (int q = 0; q < n_qubits; ++q)
            row[q] = static_cast<double>((i >> (n_qubits - 1 - q)) & 1u);
        const double p = probs.p[i];
        if (prob_scale) {
            const double v = p * scale;
            row[n_qubits] = v < 1.0 ? v : 1.0;
            inputs.prob_grad_scale[i] = v <= 1.0 ? scale : 0.0;
        } else {
            // Squares can carry 1-ulp dust above 1; clamp without killing the
            // gradient inside the interval.
            row[n_qubits] = p < 0.0 ? 0.0 : (p > 1.0 ? 1.0 : p);
            inputs.prob_grad_scale[i] = (p >= 0.0 && p <= 1.0) ? 1.0 : 0.0;
        }
    }
    return inputs;
}

WeightVector map_weights(const Mapping& mapping, const MappingInputs& inputs) {
    if (mapping_input_dim(mapping) != inputs.sites)
        throw ConfigError("map_weights: mapping expects " +
                          std::to_string(mapping_input_dim(mapping)) + " coordinates, inputs have " +
                          std::to_string(inputs.sites));
    WeightVector w;
    w.omega.resize(inputs.count);
    if (const auto* mps = std::get_if<MpsMapping>(&mapping)) {
        for (std::size_t i = 0; i < inputs.count; ++i)
            w.omega[i] = mps_contract(*mps, inputs.input(i));
    } else {
        const auto& mlp = std::get<MlpMapping>(mapping);
        for (std::size_t i = 0; i < inputs.count; ++i)
            w.omega[i] = mlp_map_forward(mlp, inputs.input(i));
    }
    return w;
}

WeightVector generate_weights(const Mapping& mapping, const ProbVector& probs, std::size_t m,
                              bool prob_scale) {
    return map_weights(mapping, build_mapping_inputs(probs, m, prob_scale));
}

namespace {

MappingBackprop mps_backprop(const MpsMapping& mapping, const MappingInputs& inputs,
                             std::span<const double> upstream) {
    const int r = mapping.bond_dim;
    const int sites = mapping.sites;
    const std::size_t rr = static_cast<std::size_t>(r);

    MappingBackprop out;
    out.param_grad.assign(mapping.param_count(), 0.0);
    out.prob_grad.assign(inputs.count, 0.0);

    double* g_first = out.param_grad.data();
    const std::size_t middle_base = 2 * rr;
    const std::size_t middle_stride = 2 * rr * rr;
    double* g_last = out.param_grad.data() + middle_base + middle_stride * mapping.middle.size();

    // Per-input prefix products P_j (j = 0 .. sites-2) and suffix products
    // T_j (j = 1 .. sites-1), each a bond vector of length r.
    std::vector<double> prefix((sites - 1) * rr), suffix((sites - 1) * rr);
    std::vector<std::array<double, 2>> xi(sites);

    for (std::size_t i = 0; i < inputs.count; ++i) {
        const double u = upstream[i];
        const auto coords = inputs.input(i);
        for (int j = 0; j < sites; ++j)
            xi[j] = {coords[j], 1.0 - coords[j]};

        double* p0 = prefix.data();
        for (int a = 0; a < r; ++a)
            p0[a] = xi[0][0] * mapping.first[a] + xi[0][1] * mapping.first[rr + a];
        for (int j = 1; j <= sites - 2; ++j) {
            const auto& tensor = mapping.middle[static_cast<std::size_t>(j) - 1];
            const double* prev = prefix.data() + (j - 1) * rr;
            double* cur = prefix.data() + j * rr;
            std::fill(cur, cur + r, 0.0);
            for (int a = 0; a < r; ++a) {
                const double w0 = prev[a] * xi[j][0];
                const double w1 = prev[a] * xi[j][1];
                const std::size_t row0 = static_cast<std::size_t>(a) * 2 * rr;
                for (int b = 0; b < r; ++b)
                    cur[b] += w0 * tensor[row0 + b] + w1 * tensor[row0 + rr + b];
            }
        }

        double* t_last = suffix.data() + (sites - 2) * rr;
        for (int a = 0; a < r; ++a)
            t_last[a] = xi[sites - 1][0] * mapping.last[2 * a] + xi[sites - 1][1] * mapping.last[2 * a + 1];
        for (int j = sites - 2; j >= 1; --j) {
            const auto& tensor = mapping.middle[static_cast<std::size_t>(j) - 1];
            const double* nxt = suffix.data() + j * rr; // T_{j+1}
            double* cur = suffix.data() + (j - 1) * rr; // T_j
            for (int a = 0; a < r; ++a) {
                const std::size_t row0 = static_cast<std::size_t>(a) * 2 * rr;
                double acc = 0.0;
                for (int b = 0; b < r; ++b)
                    acc += (xi[j][0] * tensor[row0 + b] + xi[j][1] * tensor[row0 + rr + b]) * nxt[b];
                cur[a] = acc;
            }
        }

        // First boundary: d omega / d first[s, a] = xi_0[s] * T_1[a].
        const double* t1 = suffix.data();
        for (int s = 0; s < 2; ++s)
            for (int a = 0; a < r; ++a)
                g_first[static_cast<std::size_t>(s) * rr + a] += u * xi[0][s] * t1[a];

        // Interior: d omega / d A_j[a, s, b] = xi_j[s] * P_{j-1}[a] * T_{j+1}[b].
        for (int j = 1; j <= sites - 2; ++j) {
            double* g_mid = out.param_grad.data() + middle_base + middle_stride * (j - 1);
            const double* pj = prefix.data() + (j - 1) * rr;
            const double* tj = suffix.data() + j * rr;
            for (int a = 0; a < r; ++a) {
                const double pa0 = u * pj[a] * xi[j][0];
                const double pa1 = u * pj[a] * xi[j][1];
                const std::size_t row0 = static_cast<std::size_t>(a) * 2 * rr;
                for (int b = 0; b < r; ++b) {
                    g_mid[row0 + b] += pa0 * tj[b];
                    g_mid[row0 + rr + b] += pa1 * tj[b];
                }
            }
        }

        // Last boundary and the probability coordinate. The feature map
        // derivative is [+1, -1]; the prob_scale chain factor is precomputed.
        const double* p_end = prefix.data() + (sites - 2) * rr;
        double dcoord = 0.0;
        for (int a = 0; a < r; ++a) {
            g_last[static_cast<std::size_t>(a) * 2] += u * p_end[a] * xi[sites - 1][0];
            g_last[static_cast<std::size_t>(a) * 2 + 1] += u * p_end[a] * xi[sites - 1][1];
            dcoord += p_end[a] * (mapping.last[2 * a] - mapping.last[2 * a + 1]);
        }
        out.prob_grad[i] = u * dcoord * inputs.prob_grad_scale[i];
    }
    return out;
}

MappingBackprop mlp_backprop(const MlpMapping& mapping, const MappingInputs& inputs,
                             std::span<const double> upstream) {
    const int h = mapping.hidden;
    const int in = mapping.input_dim;
    const std::size_t hs = static_cast<std::size_t>(h);
    const std::size_t ins = static_cast<std::size_t>(in);

    MappingBackprop out;
    out.param_grad.assign(mapping.param_count(), 0.0);
    out.prob_grad.assign(inputs.count, 0.0);

    double* g_w1 = out.param_grad.data();
    double* g_b1 = g_w1 + hs * ins;
    double* g_w2 = g_b1 + hs;
    double* g_b2 = g_w2 + hs * hs;
    double* g_w3 = g_b2 + hs;
    double* g_b3 = g_w3 + hs;

    std::vector<double> a1(h), a2(h), dz1(h), dz2(h);
    for (std::size_t i = 0; i < inputs.count; ++i) {
        const double u = upstream[i];
        const auto x = inputs.input(i);

        for (int k = 0; k < h; ++k) {
            double z = mapping.b1[k];
            for (int j = 0; j < in; ++j)
                z += mapping.w1[static_cast<std::size_t>(k) * ins + j] * x[j];
            a1[k] = std::tanh(z);
        }
        for (int k = 0; k < h; ++k) {
            double z = mapping.b2[k];
            for (int j = 0; j < h; ++j)
                z += mapping.w2[static_cast<std::size_t>(k) * hs + j] * a1[j];
            a2[k] = std::tanh(z);
        }

        g_b3[0] += u;
        for (int k = 0; k < h; ++k) {
            g_w3[k] += u * a2[k];
            dz2[k] = u * mapping.w3[k] * (1.0 - a2[k] * a2[k]);
        }
        for (int k = 0; k < h; ++k) {
            g_b2[k] += dz2[k];
            for (int j = 0; j < h; ++j)
                g_w2[static_cast<std::size_t>(k) * hs + j] += dz2[k] * a1[j];
        }
        for (int j = 0; j < h; ++j) {
            double da1 = 0.0;
            for (int k = 0; k < h; ++k)
                da1 += mapping.w2[static_cast<std::size_t>(k) * hs + j] * dz2[k];
            dz1[j] = da1 * (1.0 - a1[j] * a1[j]);
        }
        for (int k = 0; k < h; ++k) {
            g_b1[k] += dz1[k];
            for (int j = 0; j < in; ++j)
                g_w1[static_cast<std::size_t>(k) * ins + j] += dz1[k] * x[j];
        }
        double dx_last = 0.0;
        for (int k = 0; k < h; ++k)
            dx_last += mapping.w1[static_cast<std::size_t>(k) * ins + (ins - 1)] * dz1[k];
        out.prob_grad[i] = dx_last * inputs.prob_grad_scale[i];
    }
    return out;
}

} // namespace

MappingBackprop mapping_backprop(const Mapping& mapping, const MappingInputs& inputs,
                                 std::span<const double> upstream) {
    if (upstream.size() != inputs.count)
        throw ConfigError("mapping_backprop: upstream length " + std::to_string(upstream.size()) +
                          " != input count " + std::to_string(inputs.count));
    if (mapping_input_dim(mapping) != inputs.sites)
        throw ConfigError("mapping_backprop: coordinate count mismatch");
    if (const auto* mps = std::get_if<MpsMapping>(&mapping))
        return mps_backprop(*mps, inputs, upstream);
    return mlp_backprop(std::get<MlpMapping>(mapping), inputs, upstream);
}

} // namespace qtrain
