#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>

#include "qtrain/dataset.hpp"
#include "qtrain/errors.hpp"

using namespace qtrain;
namespace fs = std::filesystem;

namespace {

fs::path fixture_dir() {
    const fs::path dir = fs::temp_directory_path() / "qtrain_dataset_fixtures";
    fs::create_directories(dir);
    return dir;
}

void write_be32(std::ofstream& out, std::uint32_t v) {
    const std::array<unsigned char, 4> bytes{static_cast<unsigned char>(v >> 24),
                                             static_cast<unsigned char>(v >> 16),
                                             static_cast<unsigned char>(v >> 8),
                                             static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(bytes.data()), 4);
}

std::string write_idx_images(const std::string& name,
                             const std::vector<std::vector<unsigned char>>& images, int rows,
                             int cols, std::uint32_t magic = 0x00000803) {
    const fs::path path = fixture_dir() / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    write_be32(out, magic);
    write_be32(out, static_cast<std::uint32_t>(images.size()));
    write_be32(out, static_cast<std::uint32_t>(rows));
    write_be32(out, static_cast<std::uint32_t>(cols));
    for (const auto& img : images)
        out.write(reinterpret_cast<const char*>(img.data()),
                  static_cast<std::streamsize>(img.size()));
    return path.string();
}

std::string write_idx_labels(const std::string& name, const std::vector<unsigned char>& labels,
                             std::uint32_t magic = 0x00000801) {
    const fs::path path = fixture_dir() / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    write_be32(out, magic);
    write_be32(out, static_cast<std::uint32_t>(labels.size()));
    out.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
    return path.string();
}

std::string write_cifar(const std::string& name,
                        const std::vector<std::pair<unsigned char, unsigned char>>& records) {
    // Each record: label byte + 3072 pixels all set to the given value.
    const fs::path path = fixture_dir() / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    for (const auto& [label, pixel] : records) {
        out.put(static_cast<char>(label));
        std::vector<char> pixels(3072, static_cast<char>(pixel));
        out.write(pixels.data(), static_cast<std::streamsize>(pixels.size()));
    }
    return path.string();
}

Dataset tiny_dataset() {
    // 10 samples, labels 0..4 twice, pixel value = sample index.
    std::vector<std::vector<unsigned char>> images;
    std::vector<unsigned char> labels;
    for (int i = 0; i < 10; ++i) {
        images.emplace_back(4, static_cast<unsigned char>(i));
        labels.push_back(static_cast<unsigned char>(i % 5));
    }
    const auto img_path = write_idx_images("tiny-images", images, 2, 2);
    const auto lbl_path = write_idx_labels("tiny-labels", labels);
    return load_mnist_idx(img_path, lbl_path);
}

} // namespace

TEST_CASE("idx loader reads images and labels and normalizes to [0, 1]") {
    std::vector<std::vector<unsigned char>> images{{0, 128, 255, 64}, {10, 20, 30, 40}};
    const auto img_path = write_idx_images("ok-images", images, 2, 2);
    const auto lbl_path = write_idx_labels("ok-labels", {3, 9});
    const Dataset data = load_mnist_idx(img_path, lbl_path);
    CHECK(data.count() == 2);
    CHECK(data.channels == 1);
    CHECK(data.height == 2);
    CHECK(data.width == 2);
    CHECK(data.class_count == 10);
    CHECK(data.labels == std::vector<int>{3, 9});
    CHECK(data.images[0] == 0.0f);
    CHECK(data.images[1] == Catch::Approx(128.0 / 255.0));
    CHECK(data.images[2] == 1.0f);
}

TEST_CASE("idx loader rejects malformed files with the offending detail") {
    std::vector<std::vector<unsigned char>> images{{1, 2, 3, 4}};

    // Labels file carrying the images magic is rejected.
    const auto img_path = write_idx_images("magic-images", images, 2, 2);
    const auto bad_labels = write_idx_labels("magic-labels", {1}, 0x00000803);
    CHECK_THROWS_WITH(load_mnist_idx(img_path, bad_labels),
                      Catch::Matchers::ContainsSubstring("bad magic"));

    // Empty file: truncation.
    const fs::path empty = fixture_dir() / "empty-file";
    std::ofstream(empty, std::ios::trunc).close();
    CHECK_THROWS_AS(load_mnist_idx(empty.string(), bad_labels), DataError);
    CHECK_THROWS_WITH(load_mnist_idx(empty.string(), bad_labels),
                      Catch::Matchers::ContainsSubstring("offset"));

    // Truncated payload.
    {
        std::ofstream out(fixture_dir() / "short-images", std::ios::binary | std::ios::trunc);
        write_be32(out, 0x00000803);
        write_be32(out, 2);
        write_be32(out, 2);
        write_be32(out, 2);
        out.put(char(1)); // 1 of 8 payload bytes
    }
    CHECK_THROWS_WITH(load_mnist_idx((fixture_dir() / "short-images").string(),
                                     write_idx_labels("short-labels", {0, 1})),
                      Catch::Matchers::ContainsSubstring("truncated"));

    // Image/label count mismatch.
    const auto mismatched = write_idx_labels("mismatch-labels", {1, 2, 3});
    CHECK_THROWS_WITH(load_mnist_idx(img_path, mismatched),
                      Catch::Matchers::ContainsSubstring("count mismatch"));

    // Missing file names the path.
    CHECK_THROWS_WITH(load_mnist_idx("/nonexistent/images", mismatched),
                      Catch::Matchers::ContainsSubstring("/nonexistent/images"));
}

TEST_CASE("cifar loader parses records and validates labels and sizes") {
    const auto ok = write_cifar("cifar-ok.bin", {{0, 10}, {9, 200}});
    const Dataset data = load_cifar10_binary({ok});
    CHECK(data.count() == 2);
    CHECK(data.channels == 3);
    CHECK(data.height == 32);
    CHECK(data.width == 32);
    CHECK(data.labels == std::vector<int>{0, 9});
    CHECK(data.images[0] == Catch::Approx(10.0 / 255.0));
    CHECK(data.images[3072] == Catch::Approx(200.0 / 255.0));

    const auto multi_a = write_cifar("cifar-a.bin", {{1, 1}, {2, 2}});
    const auto multi_b = write_cifar("cifar-b.bin", {{3, 3}});
    CHECK(load_cifar10_binary({multi_a, multi_b, ok}).count() == 5);

    const auto bad_label = write_cifar("cifar-bad-label.bin", {{10, 1}});
    CHECK_THROWS_AS(load_cifar10_binary({bad_label}), DataError);

    const fs::path ragged = fixture_dir() / "cifar-ragged.bin";
    {
        std::ofstream out(ragged, std::ios::binary | std::ios::trunc);
        std::vector<char> bytes(3072, 0); // one byte short of a record
        out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    CHECK_THROWS_WITH(load_cifar10_binary({ragged.string()}),
                      Catch::Matchers::ContainsSubstring("3073"));
}

TEST_CASE("batches shuffle deterministically per (seed, epoch)") {
    const Dataset data = tiny_dataset();

    const auto one = batches(data, 16, 5, 0);
    REQUIRE(one.size() == 1);
    CHECK(one[0].size() == 10);
    std::vector<int> sorted = one[0];
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

    CHECK(batches(data, 3, 5, 2) == batches(data, 3, 5, 2));
    CHECK(batches(data, 3, 5, 2) != batches(data, 3, 5, 3));
    CHECK(batches(data, 3, 5, 2) != batches(data, 3, 6, 2));

    const auto partial = batches(data, 4, 1, 1);
    REQUIRE(partial.size() == 3);
    CHECK(partial[2].size() == 2); // last partial batch retained

    CHECK_THROWS_AS(batches(data, 0, 1, 1), ConfigError);
}

TEST_CASE("subset filters, relabels, and caps deterministically") {
    const Dataset data = tiny_dataset(); // labels 0..4, two of each

    const Dataset binary = subset(data, {1, 3}, std::nullopt);
    CHECK(binary.count() == 4);
    CHECK(binary.class_count == 2);
    CHECK(binary.labels == std::vector<int>{0, 1, 0, 1}); // 1 -> 0, 3 -> 1 in file order
    // Pixel payloads follow their samples (samples 1, 3, 6, 8).
    CHECK(binary.images[0] == Catch::Approx(1.0f / 255.0f));
    CHECK(binary.images[4] == Catch::Approx(3.0f / 255.0f));

    CHECK(subset(data, {0, 1}, 0).count() == 0);
    CHECK(subset(data, {2}, 100).count() == 2); // cap beyond availability: all, no error
    const Dataset capped = subset(data, {0, 1, 2, 3, 4}, 1);
    CHECK(capped.count() == 5); // first occurrence of each class

    // Class 7 exists in the 10-class universe but has no samples here.
    CHECK(subset(data, {7}, std::nullopt).count() == 0);

    CHECK_THROWS_AS(subset(data, {}, std::nullopt), DomainError);
    CHECK_THROWS_AS(subset(data, {10}, std::nullopt), DomainError);
    CHECK_THROWS_AS(subset(data, {-1}, std::nullopt), DomainError);
}

TEST_CASE("make_batch materializes doubles in sample order") {
    const Dataset data = tiny_dataset();
    const std::vector<int> idx{3, 0, 7};
    const Batch batch = make_batch(data, idx);
    CHECK(batch.count == 3);
    CHECK(batch.input_shape == std::array<int, 3>{1, 2, 2});
    CHECK(batch.labels == std::vector<int>{3, 0, 2});
    CHECK(batch.inputs[0] == Catch::Approx(3.0 / 255.0));
    CHECK(batch.inputs[4] == Catch::Approx(0.0));
    CHECK(batch.inputs[8] == Catch::Approx(7.0 / 255.0));
    CHECK_THROWS_AS(make_batch(data, std::vector<int>{99}), DomainError);
}

TEST_CASE("the shipped MNIST subset loads cleanly") {
    const std::string dir = std::string(QTRAIN_SOURCE_DIR) + "/data";
    const Dataset train =
        load_mnist_idx(dir + "/train-images-idx3-ubyte", dir + "/train-labels-idx1-ubyte");
    const Dataset test =
        load_mnist_idx(dir + "/t10k-images-idx3-ubyte", dir + "/t10k-labels-idx1-ubyte");
    CHECK(train.count() == 7996);
    CHECK(test.count() == 2004);
    CHECK(train.height == 28);
    CHECK(train.width == 28);

    std::array<int, 10> histogram{};
    for (int label : train.labels)
        ++histogram[static_cast<std::size_t>(label)];
    for (int c = 0; c < 10; ++c)
        CHECK(histogram[static_cast<std::size_t>(c)] >= 500);
    for (float v : test.images) {
        if (v < 0.0f || v > 1.0f)
            FAIL("pixel outside [0, 1]");
    }
}
