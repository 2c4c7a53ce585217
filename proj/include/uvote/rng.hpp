#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace uvote {

// Draws built directly on mt19937_64. The std:: distributions are
// implementation-defined, which would break the bit-for-bit reproducibility
// contract, so the few distributions we need are spelled out here.

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;  // [0, 1)
}

inline double uniform_range(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * uniform01(rng);
}

inline double standard_normal(std::mt19937_64& rng) {
  // Box-Muller, one variate per pair of uniforms.
  const double u1 = 1.0 - uniform01(rng);  // (0, 1]
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double laplace(std::mt19937_64& rng, double scale) {
  // u strictly inside (-0.5, 0.5) so the log stays finite.
  const double u = (static_cast<double>(rng() >> 11) + 0.5) * 0x1.0p-53 - 0.5;
  const double mag = std::log(1.0 - 2.0 * std::abs(u));
  return u >= 0.0 ? -scale * mag : scale * mag;
}

inline std::uint64_t bounded(std::mt19937_64& rng, std::uint64_t n) {
  return n ? rng() % n : 0;  // modulo bias is ~2^-64, irrelevant here
}

inline std::vector<std::size_t> permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(bounded(rng, i));
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace uvote
