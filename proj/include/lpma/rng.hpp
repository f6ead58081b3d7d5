#pragma once

#include <cstdint>
#include <random>

namespace lpma {

// SplitMix64 finalizer; used to derive independent stream seeds from a
// master seed and a counter, so results never depend on scheduling.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream, std::uint64_t sub = 0) noexcept {
    return splitmix64(splitmix64(master ^ splitmix64(stream)) + sub);
}

using Rng = std::mt19937_64;

}  // namespace lpma
