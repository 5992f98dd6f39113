#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace keybuf {

using Rng = std::mt19937_64;

// Uniform double in [0,1) from the top 53 bits of one engine draw.
// Used instead of std::uniform_real_distribution so that traces depend only
// on the engine state, not on the standard library's distribution internals.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline int uniform_bit(Rng& rng) {
    return static_cast<int>(rng() >> 63);
}

// Uniform integer in [0, bound) by rejection on the top bits.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v;
    do {
        v = rng();
    } while (v >= limit);
    return v % bound;
}

// Standard normal via Box-Muller; consumes two uniforms per call.
inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    double u2 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

} // namespace keybuf
