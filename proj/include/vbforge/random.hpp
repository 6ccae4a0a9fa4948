#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace vbforge {

using rng_engine = std::mt19937_64;

// Uniform draw in [0, n). The standard distributions are implementation
// defined, so draws here use plain rejection sampling on the engine output to
// keep sequences identical across standard libraries.
inline std::uint64_t uniform_below(rng_engine & rng, std::uint64_t n) {
    if (n <= 1) {
        return 0;
    }
    const std::uint64_t limit = rng_engine::max() - (rng_engine::max() % n + 1) % n;
    std::uint64_t x;
    do {
        x = rng();
    } while (x > limit);
    return x % n;
}

template <typename T>
void seeded_shuffle(std::span<T> items, rng_engine & rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

} // namespace vbforge
