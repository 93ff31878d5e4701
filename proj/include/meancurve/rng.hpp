#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace meancurve {

//! splitmix64 finalizer; used for counter-based seed derivation.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

//! Derive an independent seed from (master, stream, index).
//!
//! Replicate i of stream s always receives the same seed regardless of
//! scheduling, so concurrent replicates cannot change results.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t index) {
    return splitmix64(splitmix64(splitmix64(master) ^ stream) ^ index);
}

inline std::mt19937_64 make_rng(std::uint64_t seed) {
    return std::mt19937_64(splitmix64(seed));
}

//! Canonical uniform draw in [0, 1) with 53 random bits.
//! Pinned here (rather than std::uniform_real_distribution) so sampling
//! output is a pure function of the engine sequence.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

//! Standard normal via Box-Muller on pinned uniforms.
inline double normal01(std::mt19937_64& rng) {
    double u1 = 0.0;
    do {
        u1 = uniform01(rng);
    } while (u1 <= 0.0);
    const double u2 = uniform01(rng);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

} // namespace meancurve
