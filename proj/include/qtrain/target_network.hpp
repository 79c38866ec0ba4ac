#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "qtrain/mapping.hpp"

namespace qtrain {

enum class Activation { None, Relu };

struct DenseLayer {
    int in = 0;
    int out = 0;
    Activation act = Activation::None;
};

struct Conv2dLayer {
    int in_ch = 0;
    int out_ch = 0;
    int kernel = 0;
    int stride = 1;
    Activation act = Activation::None;
};

struct MaxPool2dLayer {
    int kernel = 0;
};

struct FlattenLayer {};

using LayerSpec = std::variant<DenseLayer, Conv2dLayer, MaxPool2dLayer, FlattenLayer>;

/// Architecture of the classical model whose weights are generated rather
/// than stored. The loss is always softmax cross-entropy over class_count
/// logits produced by the final layer.
struct TargetNetworkSpec {
    std::array<int, 3> input_shape{}; // channels, height, width
    std::vector<LayerSpec> layers;
    int class_count = 0;
};

/// Shipped reference architectures. The output layer width follows
/// class_count so the same preset serves subset tasks.
TargetNetworkSpec target_preset(std::string_view name, int class_count);

/// One parameter tensor slot in the flat weight vector. Order is layer-major
/// with weights before biases and row-major tensors, which fixes the
/// bijection between flat index and parameter slot.
struct LayoutEntry {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
    std::vector<int> shape;
};

std::vector<LayoutEntry> flatten_layout(const TargetNetworkSpec& spec);

/// Total parameter count m; validates that consecutive layer shapes compose.
std::size_t param_count(const TargetNetworkSpec& spec);

/// A spec plus its assigned flat weight vector. flatten(assign(w)) == w
/// holds bitwise because layers view slices of the stored vector.
struct TargetNetwork {
    TargetNetworkSpec spec;
    std::vector<double> weights;
};

TargetNetwork assign_weights(const TargetNetworkSpec& spec, const WeightVector& omega);

struct Batch {
    int count = 0;
    std::array<int, 3> input_shape{};
    std::vector<double> inputs; // count x channels x height x width
    std::vector<int> labels;
};

struct LossResult {
    double loss = 0.0;
    double accuracy = 0.0;
};

/// Mean softmax cross-entropy and argmax accuracy over the batch.
LossResult forward_loss(const TargetNetwork& net, const Batch& batch);

struct BackwardResult {
    double loss = 0.0;
    double accuracy = 0.0;
    std::vector<double> grad; // dLoss/dWeights, flat, length m
};

/// Recomputes the forward pass and returns the exact mean-loss gradient with
/// respect to the flat weight vector. Examples are reduced in index order.
BackwardResult backward(const TargetNetwork& net, const Batch& batch);

} // namespace qtrain
