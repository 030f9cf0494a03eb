#pragma once

// Dataset tree ingestion, deterministic batching and a synthetic stand-in dataset.
//
// Layout: root/{train,test,valid}/{autistic,non_autistic}/*.{png,jpg,jpeg,ppm}
// Label 0 = autistic, 1 = non_autistic.

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "c2f/tensor.hpp"

namespace c2f {

inline constexpr std::array<std::string_view, 3> kSplitNames = {"train", "test", "valid"};
inline constexpr std::array<std::string_view, 2> kClassFolders = {"autistic", "non_autistic"};
inline constexpr std::array<std::string_view, 2> kClassLabels = {"Autistic", "Non Autistic"};

struct Sample {
    std::filesystem::path path;
    int label = 0;
    bool operator==(const Sample&) const = default;
};

struct SplitManifest {
    std::vector<Sample> samples;
    std::array<std::size_t, 2> class_counts{};
    bool operator==(const SplitManifest&) const = default;
};

struct DatasetManifest {
    std::filesystem::path root;
    std::map<std::string, SplitManifest, std::less<>> splits;

    const SplitManifest& split(std::string_view name) const;
    bool operator==(const DatasetManifest&) const = default;
};

// Throws DataError naming the missing split/class folder, or an empty class folder.
DatasetManifest load_manifest(const std::filesystem::path& root);

struct Batch {
    Tensor images;                     // [N,3,S,S] in [0,1]
    std::vector<int> labels;
    std::vector<std::size_t> indices;  // positions in the split's sample list
};

// Index groups for one epoch. With shuffle the permutation is seeded from
// (seed, epoch); the final short batch is kept.
std::vector<std::vector<std::size_t>> batch_plan(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch, bool shuffle);

// Decodes samples of one split into batches, optionally memoizing decoded
// images. Decoding may be spread over `workers` threads; the assembled batch
// order never depends on the worker count.
class BatchLoader {
public:
    BatchLoader(const SplitManifest& split, std::size_t image_size, bool cache = true, std::size_t workers = 1);

    Batch load(std::span<const std::size_t> indices);
    std::size_t size() const { return split_->samples.size(); }
    std::size_t image_size() const { return image_size_; }

private:
    const Tensor& image(std::size_t index);

    const SplitManifest* split_;
    std::size_t image_size_;
    bool cache_;
    std::size_t workers_;
    std::vector<Tensor> decoded_;
};

std::vector<Batch> batches(const DatasetManifest& manifest, std::string_view split, std::size_t batch_size,
                           std::uint64_t seed, std::uint64_t epoch, bool shuffle, std::size_t image_size = 128);

struct SyntheticCounts {
    std::size_t train = 0;
    std::size_t test = 0;
    std::size_t valid = 0;
};

// Per-class counts written by generate_synthetic: n for train, max(2, n/2) for test and valid.
SyntheticCounts synthetic_counts(std::size_t n_per_class);

// Writes the dataset layout with PPM images. Class 0 is red-dominant, class 1
// blue-dominant; files are byte-identical for a given seed.
void generate_synthetic(std::size_t n_per_class, std::size_t image_size, std::uint64_t seed,
                        const std::filesystem::path& out_root);

}  // namespace c2f
