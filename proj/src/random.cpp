#include "dccgcn/random.hpp"

#include <cmath>

#include "dccgcn/errors.hpp"

namespace dccgcn {

namespace {
constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ull;

std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}
}  // namespace

std::uint64_t Rng::next_u64() {
    state_ += kGamma;
    return mix64(state_);
}

double Rng::uniform() {
    // 53 random bits -> [0, 1)
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform();
}

double Rng::normal() {
    // 1 - u in (0, 1] keeps the log argument away from zero.
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

std::uint64_t Rng::uniform_index(std::uint64_t bound) {
    if (bound == 0) {
        throw ContractError("Rng::uniform_index: bound must be >= 1");
    }
    // Fixed-point multiply; bias is ~bound/2^64 and irrelevant here.
    return static_cast<std::uint64_t>(
        (static_cast<unsigned __int128>(next_u64()) * bound) >> 64);
}

std::uint64_t Rng::mix(std::uint64_t seed, std::uint64_t salt) {
    return mix64(seed ^ mix64(salt + kGamma));
}

}  // namespace dccgcn
