#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace distillab {

// std::mt19937_64 output is pinned by the standard, but the distributions are
// not. Every sampling path below maps raw engine output by hand so runs are
// bit-identical across standard libraries and thread counts.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // [0, n), unbiased via rejection
  uint64_t uniform_index(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  double normal(double mean = 0.0, double stddev = 0.0) {
    if (!have_cached_) {
      double u1 = uniform01();
      double u2 = uniform01();
      // Box-Muller; u1 is kept away from 0 so log stays finite
      double r = std::sqrt(-2.0 * std::log(1.0 - u1));
      double theta = 2.0 * std::numbers::pi * u2;
      cached_ = r * std::sin(theta);
      have_cached_ = true;
      return mean + stddev * r * std::cos(theta);
    }
    have_cached_ = false;
    return mean + stddev * cached_;
  }

  // Fisher-Yates permutation of 0..n-1
  template <typename Int>
  std::vector<Int> permutation(Int n) {
    std::vector<Int> out(static_cast<size_t>(n));
    for (Int i = 0; i < n; ++i) out[static_cast<size_t>(i)] = i;
    for (Int i = n - 1; i > 0; --i) {
      auto j = static_cast<Int>(uniform_index(static_cast<uint64_t>(i) + 1));
      std::swap(out[static_cast<size_t>(i)], out[static_cast<size_t>(j)]);
    }
    return out;
  }

 private:
  std::mt19937_64 engine_;
  double cached_ = 0.0;
  bool have_cached_ = false;
};

// splitmix64; used to derive independent stream seeds from one experiment seed
inline uint64_t mix_seed(uint64_t seed, uint64_t stream) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace distillab
