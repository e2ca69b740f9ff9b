#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <utility>

namespace sft {

using Engine = std::mt19937_64;

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Seed for substream `stream` of a run seeded with `seed`. Each resampling
/// replicate or simulated trial owns one substream, so results do not depend
/// on how work is split across threads.
constexpr std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream ^ 0xD1B54A32D192ED03ULL));
}

inline Engine make_engine(std::uint64_t seed, std::uint64_t stream) {
    return Engine(substream_seed(seed, stream));
}

__extension__ using uint128 = unsigned __int128;

/// Uniform integer in [0, bound) (Lemire's nearly-divisionless method).
template <class Urbg>
std::uint64_t uniform_below(Urbg& eng, std::uint64_t bound) {
    static_assert(Urbg::min() == 0 && Urbg::max() == ~std::uint64_t{0}, "needs a full 64-bit generator");
    uint128 m = static_cast<uint128>(eng()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
        const std::uint64_t threshold = (0 - bound) % bound;
        while (low < threshold) {
            m = static_cast<uint128>(eng()) * bound;
            low = static_cast<std::uint64_t>(m);
        }
    }
    return static_cast<std::uint64_t>(m >> 64);
}

/// Fisher-Yates shuffle with a portable index draw (std::shuffle's draws are
/// implementation-defined).
template <class T, class Urbg>
void shuffle_in_place(std::span<T> values, Urbg& eng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(eng, i));
        using std::swap;
        swap(values[i - 1], values[j]);
    }
}

} // namespace sft
