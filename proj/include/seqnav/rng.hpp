#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

#include "seqnav/errors.hpp"

namespace seqnav {

// FNV-1a 64-bit. Used for config digests, cache keys, and stateless noise keys.
constexpr std::uint64_t fnv1a64(std::string_view s,
                                std::uint64_t h = 14695981039346656037ULL) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Folds the bytes of v into an FNV-1a state. Order-sensitive by design.
constexpr std::uint64_t fnv1a64_u64(std::uint64_t v,
                                    std::uint64_t h = 14695981039346656037ULL) {
  for (int i = 0; i < 8; ++i) {
    h ^= (v >> (8 * i)) & 0xffU;
    h *= 1099511628211ULL;
  }
  return h;
}

// splitmix64: tiny, fast, passes BigCrush-scale smoke checks, and trivially
// seedable. Every stochastic choice in the project flows through this so runs
// are reproducible from a single integer.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Uniform in [0, n). Multiply-shift keeps it branch-free and deterministic.
  int below(int n) {
    detail::require(n > 0, "Rng::below requires n > 0");
    return static_cast<int>(
        (static_cast<unsigned __int128>(next_u64()) * static_cast<unsigned>(n)) >> 64);
  }

  // Standard normal via Box-Muller; second value cached.
  double gaussian() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    double u2 = uniform01();
    // Guard log(0).
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  // N(0, sigma^2) truncated to [-3 sigma, 3 sigma] by resampling.
  double truncated_gaussian(double sigma) {
    if (sigma == 0.0) return 0.0;
    for (;;) {
      double g = gaussian();
      if (g >= -3.0 && g <= 3.0) return g * sigma;
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace seqnav
