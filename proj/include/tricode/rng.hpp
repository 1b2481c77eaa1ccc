#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

#include "tricode/errors.hpp"

namespace tricode {

// splitmix64 finalizer.
inline uint64_t mix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Derives an independent stream seed from a base seed and a path of indices
// (step number, example index, purpose tag, ...). Every stochastic choice in
// the pipeline draws from a seed derived this way, so any step can be
// regenerated from (base seed, step) alone; that is what makes resume
// bit-identical to an uninterrupted run.
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
  uint64_t h = mix64(base ^ 0x243f6a8885a308d3ULL);
  for (uint64_t p : path) {
    h = mix64(h ^ p);
  }
  return h;
}

// Purpose tags used in derive_seed paths.
namespace seed_tag {
constexpr uint64_t kInit = 1;
constexpr uint64_t kEpochOrder = 2;
constexpr uint64_t kMaskPlan = 3;
constexpr uint64_t kTepPlan = 4;
constexpr uint64_t kMclAnchor = 5;
constexpr uint64_t kMclPositive = 6;
constexpr uint64_t kDropout = 7;
constexpr uint64_t kSynth = 8;
}  // namespace seed_tag

// Deterministic RNG. std::mt19937_64's output sequence is fully specified by
// the standard, and all helpers here are built on raw engine output, so the
// stream is reproducible across platforms and builds.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // Uniform in [0, n); rejection sampling, no modulo bias.
  uint64_t below(uint64_t n) {
    if (n == 0) {
      throw ContractError("Rng::below: n must be positive");
    }
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t v = engine_();
    while (v >= limit) {
      v = engine_();
    }
    return v % n;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller with a cached spare.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u = 0.0;
    do {
      u = next_double();
    } while (u <= 0.0);
    const double v = next_double();
    const double r = std::sqrt(-2.0 * std::log(u));
    const double two_pi = 6.283185307179586476925286766559;
    spare_ = r * std::sin(two_pi * v);
    has_spare_ = true;
    return r * std::cos(two_pi * v);
  }

  // Normal(0, stddev) rejected outside +-cut*stddev.
  double truncated_normal(double stddev, double cut = 2.0) {
    double z = normal();
    while (z < -cut || z > cut) {
      z = normal();
    }
    return z * stddev;
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) {
      return;
    }
    for (size_t i = v.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

  // k distinct values from [0, n), returned sorted ascending.
  std::vector<int> sample_without_replacement(int n, int k) {
    if (k > n) {
      throw ContractError("Rng::sample_without_replacement: k exceeds n");
    }
    std::vector<int> pool(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      pool[static_cast<size_t>(i)] = i;
    }
    // Partial Fisher-Yates: the first k slots end up uniform without replacement.
    for (int i = 0; i < k; ++i) {
      const int j = i + static_cast<int>(below(static_cast<uint64_t>(n - i)));
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    pool.resize(static_cast<size_t>(k));
    std::sort(pool.begin(), pool.end());
    return pool;
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace tricode
