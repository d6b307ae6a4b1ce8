#pragma once

#include <cmath>
#include <cstdint>

namespace ospde::detail {

/// SplitMix64: tiny, fast, and stable across platforms. Used wherever a
/// reproducible stream is needed without dragging in <random> state quirks.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }
};

/// Uniform in the open interval (0, 1).
inline double uniform01(SplitMix64& rng) {
  return (static_cast<double>(rng.next() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
}

/// Standard normal via Box-Muller (no cached pair, fully deterministic).
inline double normal01(SplitMix64& rng) {
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

}  // namespace ospde::detail
