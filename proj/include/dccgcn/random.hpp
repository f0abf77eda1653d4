#pragma once

#include <cstdint>

namespace dccgcn {

/// Counter-based splitmix64 stream. The same seed yields the same sequence
/// on every platform, which training reproducibility and the Monte Carlo
/// simulator rely on.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64();

    /// Uniform double in [0, 1).
    double uniform();
    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi);
    /// Standard normal via Box-Muller.
    double normal();
    /// Uniform integer in [0, bound). bound must be >= 1.
    std::uint64_t uniform_index(std::uint64_t bound);

    /// Derives an independent stream seed, e.g. one per subsystem or
    /// per simulation sample.
    static std::uint64_t mix(std::uint64_t seed, std::uint64_t salt);

private:
    std::uint64_t state_;
};

}  // namespace dccgcn
