#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

#include "fairaudit/common.hpp"

namespace fairaudit {

// Seeded random source used everywhere randomness is needed.
//
// Engine: std::mt19937_64, whose output sequence is pinned by the C++ standard,
// so identical seeds give identical streams on every platform. All conversions
// (uniform doubles, normals, bounded ints) are implemented here from raw 64-bit
// draws instead of std::*_distribution, which the standard does not pin.
//
// Stream splitting: child(tag, index) derives an independent stream whose seed
// is a splitmix64 mix of (parent seed, FNV-1a(tag), index). Consumers that draw
// several logically separate blocks (e.g. one per column) take one child per
// block, so adding a block never shifts the draws of another.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng child(std::string_view tag, std::uint64_t index = 0) const {
    std::uint64_t s = seed_;
    s = mix(s ^ fnv1a64(tag));
    s = mix(s ^ index);
    return Rng(s);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1): top 53 bits of one engine draw.
  double u01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return u01() < p; }

  /// Standard normal via Box-Muller; consumes exactly two draws per call.
  double normal() {
    double u1 = 1.0 - u01();  // (0, 1], keeps log finite
    double u2 = u01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  /// Uniform integer in [lo, hi], unbiased via rejection sampling.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    require(lo <= hi, "uniform_int: empty range");
    std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(engine_());  // full 64-bit range
    std::uint64_t reject_below = (0 - range) % range;
    for (;;) {
      std::uint64_t x = engine_();
      if (x >= reject_below) return lo + static_cast<std::int64_t>(x % range);
    }
  }

  /// Fisher-Yates permutation of 0..n-1.
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      int j = static_cast<int>(uniform_int(0, i));
      std::swap(p[i], p[j]);
    }
    return p;
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
      std::swap(v[i - 1], v[j]);
    }
  }

  /// Draw an index according to the given weights (need not be normalized).
  int categorical(const std::vector<double>& weights) {
    double total = 0;
    for (double w : weights) {
      require(w >= 0, "categorical: negative weight");
      total += w;
    }
    require(total > 0, "categorical: weights sum to zero");
    double u = u01() * total;
    double acc = 0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      acc += weights[i];
      if (u < acc) return static_cast<int>(i);
    }
    return static_cast<int>(weights.size()) - 1;
  }

 private:
  // splitmix64 finalizer; decorrelates nearby seeds.
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace fairaudit
