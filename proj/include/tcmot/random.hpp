#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace tcmot {

using Rng = std::mt19937_64;

/// Independent, reproducible stream for a named purpose under one run seed.
inline Rng make_stream(std::uint64_t seed, std::string_view tag) {
    // FNV-1a over the tag, then mixed with the seed (splitmix64 finalizer).
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ULL;
    }
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (h | 1ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return Rng(z);
}

inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double gaussian(Rng& rng, double sigma = 1.0) {
    return sigma * std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace tcmot
