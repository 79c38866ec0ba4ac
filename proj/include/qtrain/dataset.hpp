#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qtrain/target_network.hpp"

namespace qtrain {

/// Immutable image-classification dataset with pixel values in [0, 1].
struct Dataset {
    int channels = 0;
    int height = 0;
    int width = 0;
    int class_count = 0;
    std::vector<float> images; // count x channels x height x width
    std::vector<int> labels;
    std::string split; // "train" or "test"

    std::size_t count() const { return labels.size(); }
};

/// Reads an IDX image/label pair (big-endian magic 0x803 / 0x801). Pixel
/// bytes are scaled by 1/255.
Dataset load_mnist_idx(const std::string& images_path, const std::string& labels_path);

/// Reads CIFAR-10 binary batches: records of 1 label byte followed by 3072
/// channel-major pixel bytes, concatenated across the given files.
Dataset load_cifar10_binary(const std::vector<std::string>& record_files);

/// Keeps only the given classes (labels re-indexed to 0..k-1 in ascending
/// original order), taking the first per_class_cap occurrences in file order.
Dataset subset(const Dataset& data, const std::vector<int>& classes,
               std::optional<std::size_t> per_class_cap);

/// Index batches for one epoch. The permutation is a pure function of
/// (seed, epoch); the final partial batch is retained.
std::vector<std::vector<int>> batches(const Dataset& data, int batch_size, std::uint64_t seed,
                                      int epoch);

Batch make_batch(const Dataset& data, std::span<const int> indices);

} // namespace qtrain
