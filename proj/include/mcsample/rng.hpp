#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <random>

namespace mcs {

/// Seeded generator whose derived draws are fully specified here rather than
/// by the standard library's (implementation-defined) distributions, so that
/// every seeded artifact is reproducible across toolchains.
///
/// The engine is std::mt19937_64, seeded through std::seed_seq with the
/// 32-bit halves of each seed word.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : Rng({seed}) {}
  Rng(std::initializer_list<std::uint64_t> words) {
    std::vector<std::uint32_t> halves;
    for (auto w : words) {
      halves.push_back(static_cast<std::uint32_t>(w & 0xffffffffu));
      halves.push_back(static_cast<std::uint32_t>(w >> 32));
    }
    std::seed_seq seq(halves.begin(), halves.end());
    engine_.seed(seq);
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n), unbiased by rejection.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller (cosine branch only).
  double normal() {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace mcs
