#pragma once

#include <cstdint>
#include <random>

namespace rgcsim {

/// SplitMix64 finalizer.
std::uint64_t splitmix64(std::uint64_t x);

/// Sub-seed for stream `index` of a run seeded with `seed`:
/// splitmix64(seed ^ splitmix64(index + 0x9e3779b97f4a7c15)).
/// Every module derives its streams through this function so that one
/// top-level seed reproduces a whole experiment.
std::uint64_t split_seed(std::uint64_t seed, std::uint64_t index);

/// Portable random source: mt19937_64 with a hand-written uniform and
/// Box-Muller normal, so draws are identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Uniform in [0, 1) with 53 random bits.
    double uniform();
    /// Uniform in (0, 1].
    double uniform_open();
    double normal();
    double normal(double mean, double sigma) { return mean + sigma * normal(); }

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace rgcsim
