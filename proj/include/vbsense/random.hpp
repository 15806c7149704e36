#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace vbsense {

// Counter-based Gaussian stream: every (seed, index) pair maps to an
// independent sample, so synthesis can be parallelized over samples while
// staying bit-reproducible. std::normal_distribution is implementation
// defined, hence the hand-rolled Box-Muller on top of splitmix64.

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

/// Uniform in (0, 1), never exactly 0.
inline double uniform01(std::uint64_t& state) {
  return (static_cast<double>(splitmix64(state) >> 11) + 0.5) * 0x1.0p-53;
}

/// Standard normal sample for stream position `index` of stream `seed`.
inline double gaussian_sample(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t state = seed ^ (index * 0xD1B54A32D192ED03ull + 0x2545F4914F6CDD1Dull);
  const double u1 = uniform01(state);
  const double u2 = uniform01(state);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace vbsense
