#pragma once

#include <cstdint>
#include <numbers>
#include <random>

namespace stochray {

// All randomness goes through std::mt19937_64, whose output sequence is fixed
// by the C++ standard.  The standard distributions are not (libstdc++ and
// libc++ differ), so uniform variates are built from raw engine output here.

using engine = std::mt19937_64;

/// SplitMix64 finalizer (Steele, Lea & Flood).  Used to derive independent
/// per-stream seeds from (seed, stream index).
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Engine for substream `stream` of a run seeded with `seed`.
inline engine make_stream(std::uint64_t seed, std::uint64_t stream)
{
    return engine{splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632BE59BD9B4E019ull))};
}

/// Uniform double in [0, 1) from the top 53 bits of one engine draw.
inline double uniform01(engine& eng) noexcept
{
    return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

inline double uniform(engine& eng, double lo, double hi) noexcept
{
    return lo + (hi - lo) * uniform01(eng);
}

inline double uniform_angle(engine& eng) noexcept
{
    return 2.0 * std::numbers::pi * uniform01(eng);
}

} // namespace stochray
