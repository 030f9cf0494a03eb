#include "c2f/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <thread>

#include "c2f/error.hpp"
#include "c2f/image.hpp"
#include "c2f/rng.hpp"

namespace fs = std::filesystem;

namespace c2f {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

bool is_image_file(const fs::path& p) {
    const std::string ext = lower(p.extension().string());
    return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".ppm";
}

// Finds a child directory whose name matches `name` case-insensitively.
fs::path find_dir(const fs::path& parent, std::string_view name) {
    const fs::path exact = parent / std::string(name);
    if (fs::is_directory(exact)) return exact;
    std::error_code ec;
    std::vector<fs::path> matches;
    for (const auto& entry : fs::directory_iterator(parent, ec)) {
        if (entry.is_directory() && lower(entry.path().filename().string()) == name) matches.push_back(entry.path());
    }
    if (matches.empty()) return {};
    std::sort(matches.begin(), matches.end());
    return matches.front();
}

}  // namespace

const SplitManifest& DatasetManifest::split(std::string_view name) const {
    auto it = splits.find(name);
    if (it == splits.end()) throw DataError("missing split: " + std::string(name));
    return it->second;
}

DatasetManifest load_manifest(const fs::path& root) {
    if (!fs::is_directory(root)) throw DataError("dataset root is not a directory: " + root.string());
    DatasetManifest m;
    m.root = root;
    for (auto split_name : kSplitNames) {
        const fs::path split_dir = find_dir(root, split_name);
        if (split_dir.empty()) throw DataError("missing split: " + std::string(split_name));
        SplitManifest split;
        for (std::size_t label = 0; label < kClassFolders.size(); ++label) {
            const fs::path class_dir = find_dir(split_dir, kClassFolders[label]);
            if (class_dir.empty()) {
                throw DataError("missing class folder: " + (split_dir / std::string(kClassFolders[label])).string());
            }
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(class_dir)) {
                if (entry.is_regular_file() && is_image_file(entry.path())) files.push_back(entry.path());
            }
            if (files.empty()) throw DataError("empty class folder: " + class_dir.string());
            std::sort(files.begin(), files.end(),
                      [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });
            for (auto& f : files) split.samples.push_back({std::move(f), static_cast<int>(label)});
            split.class_counts[label] = split.samples.size() - (label ? split.class_counts[0] : 0);
        }
        m.splits.emplace(std::string(split_name), std::move(split));
    }
    return m;
}

std::vector<std::vector<std::size_t>> batch_plan(std::size_t count, std::size_t batch_size, std::uint64_t seed,
                                                 std::uint64_t epoch, bool shuffle) {
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    std::vector<std::size_t> order(count);
    for (std::size_t i = 0; i < count; ++i) order[i] = i;
    if (shuffle) {
        Rng rng(mix_seed(seed, epoch));
        order = permutation(count, rng);
    }
    std::vector<std::vector<std::size_t>> plan;
    for (std::size_t start = 0; start < count; start += batch_size) {
        const std::size_t end = std::min(count, start + batch_size);
        plan.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                          order.begin() + static_cast<std::ptrdiff_t>(end));
    }
    return plan;
}

BatchLoader::BatchLoader(const SplitManifest& split, std::size_t image_size, bool cache, std::size_t workers)
    : split_(&split), image_size_(image_size), cache_(cache), workers_(std::max<std::size_t>(1, workers)) {
    if (image_size == 0) throw ConfigError("img_size must be positive");
    if (cache_) decoded_.resize(split.samples.size());
}

const Tensor& BatchLoader::image(std::size_t index) {
    Tensor& slot = decoded_[index];
    if (slot.empty()) slot = load_image(split_->samples[index].path, image_size_);
    return slot;
}

Batch BatchLoader::load(std::span<const std::size_t> indices) {
    if (indices.empty()) throw DataError("empty batch");
    for (auto i : indices) {
        if (i >= split_->samples.size()) throw DataError("batch index out of range");
    }
    const std::size_t n = indices.size();
    const std::size_t plane = 3 * image_size_ * image_size_;
    Batch b{Tensor({n, 3, image_size_, image_size_}), {}, {indices.begin(), indices.end()}};

    // Each slot is written by exactly one worker, so order is fixed.
    auto fill = [&](std::size_t begin, std::size_t end) {
        for (std::size_t k = begin; k < end; ++k) {
            const std::size_t idx = indices[k];
            if (cache_) {
                const Tensor& img = image(idx);
                std::copy_n(img.ptr(), plane, b.images.ptr() + k * plane);
            } else {
                Tensor img = load_image(split_->samples[idx].path, image_size_);
                std::copy_n(img.ptr(), plane, b.images.ptr() + k * plane);
            }
        }
    };
    const std::size_t workers = std::min(workers_, n);
    if (workers <= 1) {
        fill(0, n);
    } else {
        std::vector<std::thread> pool;
        std::vector<std::exception_ptr> errors(workers);
        const std::size_t chunk = (n + workers - 1) / workers;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    fill(w * chunk, std::min(n, (w + 1) * chunk));
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
        for (auto& t : pool) t.join();
        for (auto& e : errors) {
            if (e) std::rethrow_exception(e);
        }
    }
    for (auto idx : indices) b.labels.push_back(split_->samples[idx].label);
    return b;
}

std::vector<Batch> batches(const DatasetManifest& manifest, std::string_view split, std::size_t batch_size,
                           std::uint64_t seed, std::uint64_t epoch, bool shuffle, std::size_t image_size) {
    const SplitManifest& s = manifest.split(split);
    BatchLoader loader(s, image_size, false);
    std::vector<Batch> out;
    for (const auto& group : batch_plan(s.samples.size(), batch_size, seed, epoch, shuffle)) {
        out.push_back(loader.load(group));
    }
    return out;
}

SyntheticCounts synthetic_counts(std::size_t n_per_class) {
    const std::size_t small = std::max<std::size_t>(2, n_per_class / 2);
    return {n_per_class, small, small};
}

void generate_synthetic(std::size_t n_per_class, std::size_t image_size, std::uint64_t seed,
                        const fs::path& out_root) {
    if (n_per_class < 1) throw ConfigError("n_per_class must be >= 1");
    if (image_size < 1) throw ConfigError("image size must be positive");
    const SyntheticCounts counts = synthetic_counts(n_per_class);
    const std::size_t per_split[] = {counts.train, counts.test, counts.valid};

    std::uint64_t stream = 0;
    for (std::size_t s = 0; s < kSplitNames.size(); ++s) {
        for (std::size_t label = 0; label < 2; ++label) {
            const fs::path dir = out_root / std::string(kSplitNames[s]) / std::string(kClassFolders[label]);
            std::error_code ec;
            fs::create_directories(dir, ec);
            if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
            for (std::size_t i = 0; i < per_split[s]; ++i) {
                Rng rng(mix_seed(seed, ++stream));
                // Dominant channel mean in [0.55, 0.75], the others in [0.25, 0.5].
                double mean[3] = {rng.uniform(0.55, 0.75), rng.uniform(0.3, 0.5), rng.uniform(0.25, 0.45)};
                if (label == 1) std::swap(mean[0], mean[2]);
                RgbImage img{image_size, image_size, std::vector<std::uint8_t>(image_size * image_size * 3)};
                for (std::size_t p = 0; p < image_size * image_size; ++p) {
                    for (std::size_t c = 0; c < 3; ++c) {
                        const double v = std::clamp(mean[c] + rng.uniform(-0.15, 0.15), 0.0, 1.0);
                        img.pixels[p * 3 + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
                    }
                }
                char name[32];
                std::snprintf(name, sizeof name, "img_%04zu.ppm", i);
                write_file(dir / name, encode_ppm(img));
            }
        }
    }
}

}  // namespace c2f
