#pragma once
#include <cstdint>

namespace bachflow {

// Deterministic, seedable generator used everywhere randomness appears.
// xoshiro256** seeded through splitmix64, so any 64-bit seed (including 0)
// yields a well-mixed state and results are reproducible across platforms.
class Rng {
public:
    explicit Rng(std::uint64_t seed) { reseed(seed); }

    void reseed(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1).
    double uniform();

    // Uniform in [lo, hi).
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; caches the paired deviate.
    double normal();

    // Uniform integer in [0, m).
    std::uint64_t below(std::uint64_t m);

private:
    std::uint64_t s_[4]{};
    double cached_ = 0.0;
    bool has_cached_ = false;
};

} // namespace bachflow
