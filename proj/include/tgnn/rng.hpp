#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace tgnn {

using Rng = std::mt19937_64;

// splitmix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t hash_label(std::string_view label) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : label) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// Named seed derivation: every random stream is a pure function of the root
// seed, a component label and up to three indices, so results do not depend
// on scheduling order.
constexpr std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                                    std::uint64_t i = 0, std::uint64_t j = 0,
                                    std::uint64_t k = 0) noexcept {
    std::uint64_t h = mix64(root ^ hash_label(label));
    h = mix64(h ^ i);
    h = mix64(h ^ (j * 0x9e3779b97f4a7c15ULL));
    h = mix64(h ^ (k * 0xc2b2ae3d27d4eb4fULL));
    return h;
}

inline Rng derive_rng(std::uint64_t root, std::string_view label, std::uint64_t i = 0,
                      std::uint64_t j = 0, std::uint64_t k = 0) {
    return Rng(derive_seed(root, label, i, j, k));
}

// Uniform double in [0, 1) from the top 53 bits; identical across standard
// library implementations, unlike std::uniform_real_distribution.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Unbiased integer in [0, n) by rejection.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
inline double gaussian(Rng& rng) {
    const double u1 = 1.0 - uniform01(rng);  // (0, 1]
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

} // namespace tgnn
