#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>

namespace ital {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a stream seed from a base seed and a sequence of keys, so that e.g.
/// (seed, round, candidate) always maps to the same generator state.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
    std::uint64_t h = splitmix64(base);
    for (const auto k : keys) {
        h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
    }
    return h;
}

/// FNV-1a; a stable string hash for seeds and config fingerprints.
inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : s) {
        h = (h ^ c) * 0x100000001b3ULL;
    }
    return h;
}

using Rng = std::mt19937_64;

/// Uniform double in [0, 1) built from the top 53 bits; unlike
/// std::uniform_real_distribution this is identical across standard libraries.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace ital
