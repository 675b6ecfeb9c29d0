#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace ecrank {

// All randomness in a run flows from one master seed. Sub-streams are named,
// so adding a consumer never shifts another consumer's stream.
//
// mt19937_64 output is pinned by the C++ standard; the draw helpers below
// avoid std::uniform_*_distribution, whose sequences are implementation
// defined, so identical seeds reproduce identical streams on any platform.

/// Derive an independent sub-seed from a master seed and a stream name.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stream);

/// Uniform integer in [0, n), n >= 1. Rejection sampling, no modulo bias.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t n);

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// In-place Fisher-Yates shuffle driven by uniform_below.
template <typename T>
void shuffle(std::vector<T>& items, std::mt19937_64& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace ecrank
