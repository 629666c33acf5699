#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <vector>

namespace ccf {

/// Deterministic random source. All draws are built on the raw mt19937_64
/// stream (which the standard pins bit-for-bit) instead of the std
/// distributions, whose output is implementation-defined. Every seeded
/// contract in this project (init, shuffles, sampling, synthetic data)
/// routes through this class so results are reproducible across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  /// Uniform index in [0, n). Rejection sampling, no modulo bias.
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  /// Box-Muller with the usual cached spare.
  double normal(double mean, double sigma) {
    if (spare_) {
      const double z = *spare_;
      spare_.reset();
      return mean + sigma * z;
    }
    const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
    const double u2 = uniform01();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * M_PI * u2;
    spare_ = radius * std::sin(angle);
    return mean + sigma * radius * std::cos(angle);
  }

  /// Fisher-Yates; depends only on the seed, not on std::shuffle internals.
  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[index(i)]);
    }
  }

  /// Combine a seed with a stream tag into a fresh sub-seed (splitmix64).
  static std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 gen_;
  std::optional<double> spare_;
};

}  // namespace ccf
