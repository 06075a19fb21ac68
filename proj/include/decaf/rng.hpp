#pragma once

#include <cstdint>
#include <random>

namespace decaf {

// splitmix64 finalizer, used to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Derives an independent seed for a named purpose ("stream") from a base
// seed, so e.g. data generation and weight init never share a stream even
// when the user passes small consecutive seeds.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
    return mix64(base ^ mix64(stream));
}

using rng_engine = std::mt19937_64;

inline rng_engine make_rng(std::uint64_t base, std::uint64_t stream) {
    return rng_engine(derive_seed(base, stream));
}

// Fixed stream tags. Values are arbitrary but frozen: changing them changes
// every seeded result.
namespace streams {
inline constexpr std::uint64_t synth_sensitive = 1;
inline constexpr std::uint64_t synth_latent = 2;
inline constexpr std::uint64_t synth_mask = 3;
inline constexpr std::uint64_t synth_direction = 4;
inline constexpr std::uint64_t synth_edges = 5;
inline constexpr std::uint64_t synth_labels = 6;
inline constexpr std::uint64_t inject_pick = 7;
inline constexpr std::uint64_t inject_drop = 8;
inline constexpr std::uint64_t inject_pool = 9;
inline constexpr std::uint64_t model_init = 10;
inline constexpr std::uint64_t correlate = 11;
} // namespace streams

} // namespace decaf
