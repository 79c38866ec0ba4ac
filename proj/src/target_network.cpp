#include "qtrain/target_network.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qtrain/errors.hpp"

namespace qtrain {

namespace {

// Shape of the tensor flowing between layers: either an image (c, h, w) or a
// flattened vector.
struct IoShape {
    bool flat = false;
    int c = 0, h = 0, w = 0;
    int flat_size = 0;

    int size() const { return flat ? flat_size : c * h * w; }
};

IoShape propagate(const IoShape& in, const LayerSpec& layer, std::size_t index) {
    const std::string where = "target layer " + std::to_string(index);
    if (const auto* dense = std::get_if<DenseLayer>(&layer)) {
        if (!in.flat)
            throw ConfigError(where + ": dense requires a flattened input (add flatten)");
        if (in.flat_size != dense->in)
            throw ConfigError(where + ": dense expects " + std::to_string(dense->in) +
                              " inputs, got " + std::to_string(in.flat_size));
        if (dense->out < 1)
            throw ConfigError(where + ": dense output width must be >= 1");
        return {true, 0, 0, 0, dense->out};
    }
    if (const auto* conv = std::get_if<Conv2dLayer>(&layer)) {
        if (in.flat)
            throw ConfigError(where + ": conv2d requires an image input");
        if (in.c != conv->in_ch)
            throw ConfigError(where + ": conv2d expects " + std::to_string(conv->in_ch) +
                              " channels, got " + std::to_string(in.c));
        if (conv->kernel < 1 || conv->stride < 1 || conv->out_ch < 1)
            throw ConfigError(where + ": conv2d kernel, stride, out_ch must be >= 1");
        if (conv->kernel > in.h || conv->kernel > in.w)
            throw ConfigError(where + ": conv2d kernel larger than input");
        const int oh = (in.h - conv->kernel) / conv->stride + 1;
        const int ow = (in.w - conv->kernel) / conv->stride + 1;
        return {false, conv->out_ch, oh, ow, 0};
    }
    if (const auto* pool = std::get_if<MaxPool2dLayer>(&layer)) {
        if (in.flat)
            throw ConfigError(where + ": maxpool requires an image input");
        if (pool->kernel < 1 || pool->kernel > in.h || pool->kernel > in.w)
            throw ConfigError(where + ": maxpool kernel out of range");
        const int oh = (in.h - pool->kernel) / pool->kernel + 1;
        const int ow = (in.w - pool->kernel) / pool->kernel + 1;
        return {false, in.c, oh, ow, 0};
    }
    // flatten
    if (in.flat)
        throw ConfigError(where + ": input is already flat");
    return {true, 0, 0, 0, in.c * in.h * in.w};
}

IoShape input_shape_of(const TargetNetworkSpec& spec) {
    if (spec.input_shape[0] < 1 || spec.input_shape[1] < 1 || spec.input_shape[2] < 1)
        throw ConfigError("target: input shape must be positive");
    return {false, spec.input_shape[0], spec.input_shape[1], spec.input_shape[2], 0};
}

std::vector<IoShape> all_shapes(const TargetNetworkSpec& spec) {
    if (spec.class_count < 2)
        throw ConfigError("target: class_count must be >= 2");
    if (spec.layers.empty())
        throw ConfigError("target: at least one layer required");
    std::vector<IoShape> shapes;
    shapes.reserve(spec.layers.size() + 1);
    shapes.push_back(input_shape_of(spec));
    for (std::size_t i = 0; i < spec.layers.size(); ++i)
        shapes.push_back(propagate(shapes.back(), spec.layers[i], i));
    const IoShape& out = shapes.back();
    if (!out.flat || out.flat_size != spec.class_count)
        throw ConfigError("target: final layer must emit class_count = " +
                          std::to_string(spec.class_count) + " logits");
    return shapes;
}

} // namespace

TargetNetworkSpec target_preset(std::string_view name, int class_count) {
    TargetNetworkSpec spec;
    spec.class_count = class_count;
    if (name == "mnist-dense") {
        spec.input_shape = {1, 28, 28};
        spec.layers = {FlattenLayer{}, DenseLayer{784, 8, Activation::Relu},
                       DenseLayer{8, class_count, Activation::None}};
    } else if (name == "mnist-cnn") {
        spec.input_shape = {1, 28, 28};
        spec.layers = {Conv2dLayer{1, 4, 3, 1, Activation::Relu}, MaxPool2dLayer{2},
                       FlattenLayer{}, DenseLayer{4 * 13 * 13, class_count, Activation::None}};
    } else {
        throw ConfigError("unknown target preset: " + std::string(name));
    }
    all_shapes(spec); // validate composition
    return spec;
}

std::vector<LayoutEntry> flatten_layout(const TargetNetworkSpec& spec) {
    all_shapes(spec);
    std::vector<LayoutEntry> layout;
    std::size_t offset = 0;
    auto add = [&layout, &offset](std::string name, std::vector<int> shape) {
        std::size_t size = 1;
        for (int d : shape)
            size *= static_cast<std::size_t>(d);
        layout.push_back({std::move(name), offset, size, std::move(shape)});
        offset += size;
    };
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const std::string tag = std::to_string(i);
        if (const auto* dense = std::get_if<DenseLayer>(&spec.layers[i])) {
            add("dense" + tag + ".weight", {dense->out, dense->in});
            add("dense" + tag + ".bias", {dense->out});
        } else if (const auto* conv = std::get_if<Conv2dLayer>(&spec.layers[i])) {
            add("conv" + tag + ".weight", {conv->out_ch, conv->in_ch, conv->kernel, conv->kernel});
            add("conv" + tag + ".bias", {conv->out_ch});
        }
    }
    return layout;
}

std::size_t param_count(const TargetNetworkSpec& spec) {
    std::size_t total = 0;
    for (const auto& entry : flatten_layout(spec))
        total += entry.size;
    return total;
}

TargetNetwork assign_weights(const TargetNetworkSpec& spec, const WeightVector& omega) {
    const std::size_t m = param_count(spec);
    if (omega.omega.size() != m)
        throw ConfigError("assign_weights: expected " + std::to_string(m) + " weights, got " +
                          std::to_string(omega.omega.size()));
    return TargetNetwork{spec, omega.omega};
}

namespace {

void apply_activation(std::vector<double>& values, Activation act) {
    if (act == Activation::Relu)
        for (double& v : values)
            v = v > 0.0 ? v : 0.0;
}

struct ForwardTrace {
    std::vector<std::vector<double>> acts;      // acts[0] = input, one per layer after
    std::vector<std::vector<int>> pool_argmax;  // per maxpool layer, input index per output
};

// Runs one example through the network. `trace` may be null for loss-only
// evaluation.
std::vector<double> forward_example(const TargetNetwork& net, const std::vector<IoShape>& shapes,
                                    const std::vector<LayoutEntry>& layout,
                                    std::span<const double> input, ForwardTrace* trace) {
    std::size_t layout_pos = 0;
    std::vector<double> cur(input.begin(), input.end());
    if (trace)
        trace->acts.push_back(cur);

    for (std::size_t li = 0; li < net.spec.layers.size(); ++li) {
        const IoShape& in_shape = shapes[li];
        const IoShape& out_shape = shapes[li + 1];
        std::vector<double> next(static_cast<std::size_t>(out_shape.size()), 0.0);

        if (const auto* dense = std::get_if<DenseLayer>(&net.spec.layers[li])) {
            const double* w = net.weights.data() + layout[layout_pos].offset;
            const double* b = net.weights.data() + layout[layout_pos + 1].offset;
            layout_pos += 2;
            for (int o = 0; o < dense->out; ++o) {
                double z = b[o];
                const double* row = w + static_cast<std::size_t>(o) * dense->in;
                for (int j = 0; j < dense->in; ++j)
                    z += row[j] * cur[j];
                next[o] = z;
            }
            apply_activation(next, dense->act);
        } else if (const auto* conv = std::get_if<Conv2dLayer>(&net.spec.layers[li])) {
            const double* w = net.weights.data() + layout[layout_pos].offset;
            const double* b = net.weights.data() + layout[layout_pos + 1].offset;
            layout_pos += 2;
            const int ih = in_shape.h, iw = in_shape.w;
            const int oh = out_shape.h, ow = out_shape.w;
            const int k = conv->kernel, stride = conv->stride;
            for (int oc = 0; oc < conv->out_ch; ++oc) {
                const double* w_oc =
                    w + static_cast<std::size_t>(oc) * conv->in_ch * k * k;
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        double z = b[oc];
                        for (int ic = 0; ic < conv->in_ch; ++ic) {
                            const double* plane = cur.data() + static_cast<std::size_t>(ic) * ih * iw;
                            const double* w_ic = w_oc + static_cast<std::size_t>(ic) * k * k;
                            for (int ky = 0; ky < k; ++ky) {
                                const double* in_row = plane + static_cast<std::size_t>(oy * stride + ky) * iw + ox * stride;
                                const double* w_row = w_ic + static_cast<std::size_t>(ky) * k;
                                for (int kx = 0; kx < k; ++kx)
                                    z += w_row[kx] * in_row[kx];
                            }
                        }
                        next[(static_cast<std::size_t>(oc) * oh + oy) * ow + ox] = z;
                    }
            }
            apply_activation(next, conv->act);
        } else if (const auto* pool = std::get_if<MaxPool2dLayer>(&net.spec.layers[li])) {
            const int ih = in_shape.h, iw = in_shape.w;
            const int oh = out_shape.h, ow = out_shape.w;
            const int k = pool->kernel;
            std::vector<int> argmax(trace ? next.size() : 0);
            for (int c = 0; c < in_shape.c; ++c) {
                const double* plane = cur.data() + static_cast<std::size_t>(c) * ih * iw;
                for (int oy = 0; oy < oh; ++oy)
                    for (int ox = 0; ox < ow; ++ox) {
                        int best = (oy * k) * iw + ox * k;
                        double best_v = plane[best];
                        for (int ky = 0; ky < k; ++ky)
                            for (int kx = 0; kx < k; ++kx) {
                                const int idx = (oy * k + ky) * iw + (ox * k + kx);
                                if (plane[idx] > best_v) {
                                    best_v = plane[idx];
                                    best = idx;
                                }
                            }
                        const std::size_t out_idx =
                            (static_cast<std::size_t>(c) * oh + oy) * ow + ox;
                        next[out_idx] = best_v;
                        if (trace)
                            argmax[out_idx] = c * ih * iw + best;
                    }
            }
            if (trace)
                trace->pool_argmax.push_back(std::move(argmax));
        } else {
            next = cur; // flatten: same data, new shape
        }

        cur = std::move(next);
        if (trace)
            trace->acts.push_back(cur);
    }
    return cur;
}

struct SoftmaxLoss {
    double loss = 0.0;
    bool correct = false;
    std::vector<double> dlogits;
};

SoftmaxLoss softmax_cross_entropy(std::span<const double> logits, int label, bool want_grad) {
    SoftmaxLoss out;
    const std::size_t n = logits.size();
    double max_logit = logits[0];
    std::size_t argmax = 0;
    for (std::size_t i = 1; i < n; ++i)
        if (logits[i] > max_logit) {
            max_logit = logits[i];
            argmax = i;
        }
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        sum += std::exp(logits[i] - max_logit);
    out.loss = std::log(sum) - (logits[label] - max_logit);
    out.correct = (static_cast<int>(argmax) == label);
    if (want_grad) {
        out.dlogits.resize(n);
        for (std::size_t i = 0; i < n; ++i)
            out.dlogits[i] = std::exp(logits[i] - max_logit) / sum;
        out.dlogits[label] -= 1.0;
    }
    return out;
}

void check_batch(const TargetNetwork& net, const Batch& batch) {
    if (batch.count < 1)
        throw ConfigError("batch: empty");
    if (batch.input_shape != net.spec.input_shape)
        throw ConfigError("batch: input shape does not match target spec");
    const std::size_t per = static_cast<std::size_t>(batch.input_shape[0]) *
                            batch.input_shape[1] * batch.input_shape[2];
    if (batch.inputs.size() != per * static_cast<std::size_t>(batch.count) ||
        batch.labels.size() != static_cast<std::size_t>(batch.count))
        throw ConfigError("batch: data sizes inconsistent with count");
    for (int label : batch.labels)
        if (label < 0 || label >= net.spec.class_count)
            throw DataError("batch: label " + std::to_string(label) + " outside [0, " +
                            std::to_string(net.spec.class_count) + ")");
}

} // namespace

LossResult forward_loss(const TargetNetwork& net, const Batch& batch) {
    check_batch(net, batch);
    const auto shapes = all_shapes(net.spec);
    const auto layout = flatten_layout(net.spec);
    const std::size_t per = static_cast<std::size_t>(shapes.front().size());
    double loss = 0.0;
    int correct = 0;
    for (int e = 0; e < batch.count; ++e) {
        const auto logits = forward_example(
            net, shapes, layout, {batch.inputs.data() + per * static_cast<std::size_t>(e), per},
            nullptr);
        const auto sm = softmax_cross_entropy(logits, batch.labels[e], false);
        loss += sm.loss;
        correct += sm.correct ? 1 : 0;
    }
    return {loss / batch.count, static_cast<double>(correct) / batch.count};
}

BackwardResult backward(const TargetNetwork& net, const Batch& batch) {
    check_batch(net, batch);
    const auto shapes = all_shapes(net.spec);
    const auto layout = flatten_layout(net.spec);
    const std::size_t per = static_cast<std::size_t>(shapes.front().size());

    BackwardResult out;
    out.grad.assign(net.weights.size(), 0.0);
    int correct = 0;
    const double inv_count = 1.0 / batch.count;

    for (int e = 0; e < batch.count; ++e) {
        ForwardTrace trace;
        const auto logits = forward_example(
            net, shapes, layout, {batch.inputs.data() + per * static_cast<std::size_t>(e), per},
            &trace);
        const auto sm = softmax_cross_entropy(logits, batch.labels[e], true);
        out.loss += sm.loss;
        correct += sm.correct ? 1 : 0;

        std::vector<double> dy(sm.dlogits);
        for (double& v : dy)
            v *= inv_count;

        std::size_t layout_pos = layout.size();
        std::size_t pool_pos = trace.pool_argmax.size();
        for (std::size_t li = net.spec.layers.size(); li-- > 0;) {
            const IoShape& in_shape = shapes[li];
            const IoShape& out_shape = shapes[li + 1];
            const std::vector<double>& x = trace.acts[li];
            const std::vector<double>& y = trace.acts[li + 1];
            std::vector<double> dx(static_cast<std::size_t>(in_shape.size()), 0.0);

            if (const auto* dense = std::get_if<DenseLayer>(&net.spec.layers[li])) {
                layout_pos -= 2;
                const double* w = net.weights.data() + layout[layout_pos].offset;
                double* gw = out.grad.data() + layout[layout_pos].offset;
                double* gb = out.grad.data() + layout[layout_pos + 1].offset;
                for (int o = 0; o < dense->out; ++o) {
                    double dz = dy[o];
                    if (dense->act == Activation::Relu && y[o] <= 0.0)
                        dz = 0.0;
                    if (dz == 0.0)
                        continue;
                    gb[o] += dz;
                    const double* w_row = w + static_cast<std::size_t>(o) * dense->in;
                    double* gw_row = gw + static_cast<std::size_t>(o) * dense->in;
                    for (int j = 0; j < dense->in; ++j) {
                        gw_row[j] += dz * x[j];
                        dx[j] += dz * w_row[j];
                    }
                }
            } else if (const auto* conv = std::get_if<Conv2dLayer>(&net.spec.layers[li])) {
                layout_pos -= 2;
                const double* w = net.weights.data() + layout[layout_pos].offset;
                double* gw = out.grad.data() + layout[layout_pos].offset;
                double* gb = out.grad.data() + layout[layout_pos + 1].offset;
                const int ih = in_shape.h, iw = in_shape.w;
                const int oh = out_shape.h, ow = out_shape.w;
                const int k = conv->kernel, stride = conv->stride;
                for (int oc = 0; oc < conv->out_ch; ++oc) {
                    const double* w_oc = w + static_cast<std::size_t>(oc) * conv->in_ch * k * k;
                    double* gw_oc = gw + static_cast<std::size_t>(oc) * conv->in_ch * k * k;
                    for (int oy = 0; oy < oh; ++oy)
                        for (int ox = 0; ox < ow; ++ox) {
                            const std::size_t out_idx =
                                (static_cast<std::size_t>(oc) * oh + oy) * ow + ox;
                            double dz = dy[out_idx];
                            if (conv->act == Activation::Relu && y[out_idx] <= 0.0)
                                dz = 0.0;
                            if (dz == 0.0)
                                continue;
                            gb[oc] += dz;
                            for (int ic = 0; ic < conv->in_ch; ++ic) {
                                const double* x_plane =
                                    x.data() + static_cast<std::size_t>(ic) * ih * iw;
                                double* dx_plane =
                                    dx.data() + static_cast<std::size_t>(ic) * ih * iw;
                                const double* w_ic = w_oc + static_cast<std::size_t>(ic) * k * k;
                                double* gw_ic = gw_oc + static_cast<std::size_t>(ic) * k * k;
                                for (int ky = 0; ky < k; ++ky)
                                    for (int kx = 0; kx < k; ++kx) {
                                        const int in_idx =
                                            (oy * stride + ky) * iw + (ox * stride + kx);
                                        gw_ic[ky * k + kx] += dz * x_plane[in_idx];
                                        dx_plane[in_idx] += dz * w_ic[ky * k + kx];
                                    }
                            }
                        }
                }
            } else if (std::get_if<MaxPool2dLayer>(&net.spec.layers[li])) {
                const auto& argmax = trace.pool_argmax[--pool_pos];
                for (std::size_t i = 0; i < dy.size(); ++i)
                    dx[argmax[i]] += dy[i];
            } else {
                dx = dy; // flatten
            }
            dy = std::move(dx);
        }
    }
    out.loss /= batch.count;
    out.accuracy = static_cast<double>(correct) / batch.count;
    return out;
}

} // namespace qtrain
