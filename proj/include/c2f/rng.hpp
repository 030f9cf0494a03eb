#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace c2f {

// Seeded generator with distribution code of our own, so streams are
// identical across standard-library implementations.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }
    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    // Uniform integer in [0, bound).
    std::uint64_t below(std::uint64_t bound);

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Seeds derived from a run seed for independent streams.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

// Fisher-Yates permutation of [0, n).
std::vector<std::size_t> permutation(std::size_t n, Rng& rng);

}  // namespace c2f
