#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qtrain/errors.hpp"
#include "qtrain/rng.hpp"
#include "qtrain/target_network.hpp"

using namespace qtrain;

namespace {

WeightVector random_weights(std::size_t count, std::uint64_t seed, double scale = 0.5) {
    Rng rng(seed);
    WeightVector w;
    w.omega.resize(count);
    for (double& v : w.omega)
        v = rng.normal(scale);
    return w;
}

Batch random_batch(const TargetNetworkSpec& spec, int count, std::uint64_t seed) {
    Rng rng(seed);
    Batch batch;
    batch.count = count;
    batch.input_shape = spec.input_shape;
    const std::size_t per = static_cast<std::size_t>(spec.input_shape[0]) * spec.input_shape[1] *
                            spec.input_shape[2];
    batch.inputs.resize(per * static_cast<std::size_t>(count));
    for (double& v : batch.inputs)
        v = rng.uniform();
    for (int e = 0; e < count; ++e)
        batch.labels.push_back(
            static_cast<int>(rng.below(static_cast<std::uint64_t>(spec.class_count))));
    return batch;
}

// Test-local forward pass written as straight index arithmetic over the
// layout, independent of the production implementation.
double reference_loss(const TargetNetwork& net, const Batch& batch) {
    const auto layout = flatten_layout(net.spec);
    double total = 0.0;
    const std::size_t per = static_cast<std::size_t>(batch.input_shape[0]) *
                            batch.input_shape[1] * batch.input_shape[2];
    for (int e = 0; e < batch.count; ++e) {
        std::vector<double> buf(batch.inputs.begin() + static_cast<std::ptrdiff_t>(per * e),
                                batch.inputs.begin() + static_cast<std::ptrdiff_t>(per * (e + 1)));
        int c = batch.input_shape[0], h = batch.input_shape[1], w = batch.input_shape[2];
        std::size_t pos = 0;
        for (const auto& layer : net.spec.layers) {
            if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
                std::vector<double> out(static_cast<std::size_t>(dense->out));
                for (int o = 0; o < dense->out; ++o) {
                    double z = net.weights.at(layout[pos + 1].offset + o);
                    for (int j = 0; j < dense->in; ++j)
                        z += net.weights.at(layout[pos].offset + o * dense->in + j) * buf.at(j);
                    out[static_cast<std::size_t>(o)] =
                        dense->act == Activation::Relu ? std::max(0.0, z) : z;
                }
                buf = out;
                pos += 2;
            } else if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
                const int oh = (h - conv->kernel) / conv->stride + 1;
                const int ow = (w - conv->kernel) / conv->stride + 1;
                std::vector<double> out(static_cast<std::size_t>(conv->out_ch) * oh * ow);
                for (int oc = 0; oc < conv->out_ch; ++oc)
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            double z = net.weights.at(layout[pos + 1].offset + oc);
                            for (int ic = 0; ic < conv->in_ch; ++ic)
                                for (int ky = 0; ky < conv->kernel; ++ky)
                                    for (int kx = 0; kx < conv->kernel; ++kx)
                                        z += net.weights.at(
                                                 layout[pos].offset +
                                                 ((oc * conv->in_ch + ic) * conv->kernel + ky) *
                                                     conv->kernel +
                                                 kx) *
                                             buf.at((ic * h + oy * conv->stride + ky) * w +
                                                    ox * conv->stride + kx);
                            out[static_cast<std::size_t>((oc * oh + oy) * ow + ox)] =
                                conv->act == Activation::Relu ? std::max(0.0, z) : z;
                        }
                buf = out;
                c = conv->out_ch;
                h = oh;
                w = ow;
                pos += 2;
            } else if (const auto* pool = std::get_if<MaxPool2dLayer>(&layer)) {
                const int k = pool->kernel;
                const int oh = (h - k) / k + 1;
                const int ow = (w - k) / k + 1;
                std::vector<double> out(static_cast<std::size_t>(c) * oh * ow);
                for (int ch = 0; ch < c; ++ch)
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            double best = -1e300;
                            for (int ky = 0; ky < k; ++ky)
                                for (int kx = 0; kx < k; ++kx)
                                    best = std::max(
                                        best, buf.at((ch * h + oy * k + ky) * w + ox * k + kx));
                            out[static_cast<std::size_t>((ch * oh + oy) * ow + ox)] = best;
                        }
                buf = out;
                h = oh;
                w = ow;
            }
            // flatten: buffer unchanged
        }
        double max_logit = buf[0];
        for (double v : buf)
            max_logit = std::max(max_logit, v);
        double sum = 0.0;
        for (double v : buf)
            sum += std::exp(v - max_logit);
        total += std::log(sum) - (buf.at(static_cast<std::size_t>(batch.labels[e])) - max_logit);
    }
    return total / batch.count;
}

} // namespace

TEST_CASE("parameter counts follow the layer arithmetic") {
    TargetNetworkSpec tiny;
    tiny.input_shape = {1, 1, 4};
    tiny.class_count = 3;
    tiny.layers = {FlattenLayer{}, DenseLayer{4, 3, Activation::None}};
    CHECK(param_count(tiny) == 15); // 4 * 3 + 3

    const TargetNetworkSpec preset = target_preset("mnist-dense", 10);
    CHECK(param_count(preset) == 6370); // 784*8 + 8 + 8*10 + 10

    const TargetNetworkSpec binary = target_preset("mnist-dense", 2);
    CHECK(param_count(binary) == 6298);

    // A CIFAR-sized CNN expressible in the layer DSL that lands exactly on
    // the reference count of 285226.
    TargetNetworkSpec cifar;
    cifar.input_shape = {3, 32, 32};
    cifar.class_count = 10;
    cifar.layers = {Conv2dLayer{3, 20, 3, 1, Activation::Relu}, MaxPool2dLayer{2},
                    Conv2dLayer{20, 16, 3, 1, Activation::Relu}, MaxPool2dLayer{2},
                    FlattenLayer{}, DenseLayer{576, 480, Activation::Relu},
                    DenseLayer{480, 10, Activation::None}};
    CHECK(param_count(cifar) == 285226);
}

TEST_CASE("non-composing layer shapes are rejected") {
    TargetNetworkSpec bad;
    bad.input_shape = {1, 4, 4};
    bad.class_count = 2;
    bad.layers = {FlattenLayer{}, DenseLayer{15, 2, Activation::None}}; // 16 expected
    CHECK_THROWS_AS(param_count(bad), ConfigError);

    TargetNetworkSpec no_flatten;
    no_flatten.input_shape = {1, 4, 4};
    no_flatten.class_count = 2;
    no_flatten.layers = {DenseLayer{16, 2, Activation::None}};
    CHECK_THROWS_AS(param_count(no_flatten), ConfigError);

    TargetNetworkSpec wrong_tail;
    wrong_tail.input_shape = {1, 1, 4};
    wrong_tail.class_count = 3;
    wrong_tail.layers = {FlattenLayer{}, DenseLayer{4, 2, Activation::None}};
    CHECK_THROWS_AS(param_count(wrong_tail), ConfigError);
}

TEST_CASE("flatten layout is a contiguous bijection, weights before biases") {
    const TargetNetworkSpec spec = target_preset("mnist-cnn", 10);
    const auto layout = flatten_layout(spec);
    REQUIRE(layout.size() == 4); // conv w + b, dense w + b
    CHECK(layout[0].name == "conv0.weight");
    CHECK(layout[0].shape == std::vector<int>{4, 1, 3, 3});
    CHECK(layout[1].name == "conv0.bias");
    std::size_t expected_offset = 0;
    for (const auto& entry : layout) {
        CHECK(entry.offset == expected_offset);
        expected_offset += entry.size;
    }
    CHECK(expected_offset == param_count(spec));
}

TEST_CASE("assign_weights round-trips and validates length") {
    const TargetNetworkSpec spec = target_preset("mnist-dense", 4);
    const WeightVector w = random_weights(param_count(spec), 2024);
    const TargetNetwork net = assign_weights(spec, w);
    CHECK(net.weights == w.omega); // flatten(assign(w)) is the identity, bitwise

    WeightVector bad;
    bad.omega.resize(3);
    CHECK_THROWS_AS(assign_weights(spec, bad), ConfigError);
}

TEST_CASE("zero weights give uniform logits and ln(class_count) loss") {
    const TargetNetworkSpec spec = target_preset("mnist-dense", 10);
    WeightVector zeros;
    zeros.omega.assign(param_count(spec), 0.0);
    const TargetNetwork net = assign_weights(spec, zeros);
    const Batch batch = random_batch(spec, 5, 7);
    const LossResult res = forward_loss(net, batch);
    CHECK(res.loss == Catch::Approx(std::log(10.0)).margin(1e-9));
}

TEST_CASE("identity dense layer passes inputs through to logits") {
    TargetNetworkSpec spec;
    spec.input_shape = {1, 1, 2};
    spec.class_count = 2;
    spec.layers = {FlattenLayer{}, DenseLayer{2, 2, Activation::None}};
    WeightVector w;
    w.omega = {1.0, 0.0, 0.0, 1.0, 0.0, 0.0}; // row-major weight, then bias
    const TargetNetwork net = assign_weights(spec, w);

    Batch batch;
    batch.count = 1;
    batch.input_shape = spec.input_shape;
    batch.inputs = {0.3, 0.9};
    batch.labels = {1};
    // logits = inputs, so loss = softmax CE at margin 0.6 and the argmax is 1.
    const LossResult res = forward_loss(net, batch);
    const double expected = std::log(std::exp(0.3 - 0.9) + 1.0);
    CHECK(res.loss == Catch::Approx(expected).margin(1e-12));
    CHECK(res.accuracy == 1.0);
}

TEST_CASE("loss decreases monotonically in the true-class logit margin") {
    TargetNetworkSpec spec;
    spec.input_shape = {1, 1, 1};
    spec.class_count = 2;
    spec.layers = {FlattenLayer{}, DenseLayer{1, 2, Activation::None}};
    Batch batch;
    batch.count = 1;
    batch.input_shape = spec.input_shape;
    batch.inputs = {1.0};
    batch.labels = {0};
    double previous = 1e300;
    for (double margin : {0.0, 0.5, 1.0, 2.0, 4.0}) {
        WeightVector w;
        w.omega = {margin, 0.0, 0.0, 0.0}; // true-class weight grows
        const double loss = forward_loss(assign_weights(spec, w), batch).loss;
        CHECK(loss < previous);
        previous = loss;
    }
}

TEST_CASE("forward_loss matches an independent recomputation on a conv net") {
    TargetNetworkSpec spec;
    spec.input_shape = {2, 7, 7};
    spec.class_count = 4;
    spec.layers = {Conv2dLayer{2, 3, 3, 2, Activation::Relu}, MaxPool2dLayer{2}, FlattenLayer{},
                   DenseLayer{3, 4, Activation::None}};
    const WeightVector w = random_weights(param_count(spec), 5150);
    const TargetNetwork net = assign_weights(spec, w);
    const Batch batch = random_batch(spec, 6, 31337);
    CHECK(forward_loss(net, batch).loss ==
          Catch::Approx(reference_loss(net, batch)).margin(1e-10));
}

TEST_CASE("a saturated correct prediction has vanishing gradient") {
    TargetNetworkSpec spec;
    spec.input_shape = {1, 1, 2};
    spec.class_count = 2;
    spec.layers = {FlattenLayer{}, DenseLayer{2, 2, Activation::None}};
    WeightVector w;
    w.omega = {30.0, 30.0, -30.0, -30.0, 0.0, 0.0}; // huge margin toward class 0
    const TargetNetwork net = assign_weights(spec, w);
    Batch batch;
    batch.count = 1;
    batch.input_shape = spec.input_shape;
    batch.inputs = {0.8, 0.6};
    batch.labels = {0};
    const BackwardResult res = backward(net, batch);
    for (double g : res.grad)
        CHECK(std::fabs(g) < 1e-12);
}

TEST_CASE("backward matches finite differences on dense and conv nets") {
    for (int variant = 0; variant < 2; ++variant) {
        TargetNetworkSpec spec;
        spec.class_count = 3;
        if (variant == 0) {
            spec.input_shape = {1, 1, 6};
            spec.layers = {FlattenLayer{}, DenseLayer{6, 8, Activation::Relu},
                           DenseLayer{8, 3, Activation::None}};
        } else {
            spec.input_shape = {1, 8, 8};
            spec.layers = {Conv2dLayer{1, 3, 3, 1, Activation::Relu}, MaxPool2dLayer{2},
                           FlattenLayer{}, DenseLayer{27, 3, Activation::None}};
        }
        REQUIRE(param_count(spec) <= 200);
        const WeightVector w = random_weights(param_count(spec), 900 + variant);
        TargetNetwork net = assign_weights(spec, w);
        const Batch batch = random_batch(spec, 4, 777 + variant);
        const BackwardResult analytic = backward(net, batch);
        CHECK(analytic.loss == Catch::Approx(forward_loss(net, batch).loss).margin(1e-14));

        const double h = 1e-5;
        for (std::size_t k = 0; k < net.weights.size(); ++k) {
            const double saved = net.weights[k];
            net.weights[k] = saved + h;
            const double fp = forward_loss(net, batch).loss;
            net.weights[k] = saved - h;
            const double fm = forward_loss(net, batch).loss;
            net.weights[k] = saved;
            const double fd = (fp - fm) / (2.0 * h);
            const double rel = std::fabs(analytic.grad[k] - fd) / std::max(std::fabs(fd), 1e-8);
            CHECK(rel < 1e-4);
        }
    }
}

TEST_CASE("batch order does not change the mean gradient") {
    const TargetNetworkSpec spec = target_preset("mnist-cnn", 3);
    const WeightVector w = random_weights(param_count(spec), 4242, 0.2);
    const TargetNetwork net = assign_weights(spec, w);
    Batch batch = random_batch(spec, 5, 999);
    const BackwardResult forward_order = backward(net, batch);

    Batch reversed;
    reversed.count = batch.count;
    reversed.input_shape = batch.input_shape;
    const std::size_t per = static_cast<std::size_t>(batch.input_shape[0]) *
                            batch.input_shape[1] * batch.input_shape[2];
    for (int e = batch.count - 1; e >= 0; --e) {
        reversed.inputs.insert(reversed.inputs.end(),
                               batch.inputs.begin() + static_cast<std::ptrdiff_t>(per * e),
                               batch.inputs.begin() + static_cast<std::ptrdiff_t>(per * (e + 1)));
        reversed.labels.push_back(batch.labels[static_cast<std::size_t>(e)]);
    }
    const BackwardResult reverse_order = backward(net, reversed);
    REQUIRE(forward_order.grad.size() == reverse_order.grad.size());
    for (std::size_t k = 0; k < forward_order.grad.size(); ++k)
        CHECK(forward_order.grad[k] == Catch::Approx(reverse_order.grad[k]).margin(1e-12));
}

TEST_CASE("labels outside the class range are a data error") {
    const TargetNetworkSpec spec = target_preset("mnist-dense", 2);
    const TargetNetwork net = assign_weights(spec, random_weights(param_count(spec), 1));
    Batch batch = random_batch(spec, 2, 2);
    batch.labels[1] = 2;
    CHECK_THROWS_AS(forward_loss(net, batch), DataError);
}
