#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace hctc {

// All randomness in the project flows through these helpers on top of
// std::mt19937_64, whose output stream is fixed by the standard. The
// distribution transforms below are written out by hand because the
// std::*_distribution classes are not bit-portable across standard
// library implementations.
using Rng = std::mt19937_64;

// Uniform double in [0, 1), 53-bit resolution.
inline double uniform_unit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform_unit(rng);
}

// Uniform integer in [0, n) via rejection sampling.
inline std::uint64_t uniform_int(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v = rng();
  while (v >= limit) v = rng();
  return v % n;
}

// Standard normal via Box-Muller. Consumes exactly two draws per call so
// the stream stays reproducible regardless of call pattern.
inline double gaussian(Rng& rng) {
  double u1 = uniform_unit(rng);
  while (u1 <= 0.0) u1 = uniform_unit(rng);
  const double u2 = uniform_unit(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

template <typename T>
void shuffle(std::vector<T>& items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_int(rng, i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace hctc
