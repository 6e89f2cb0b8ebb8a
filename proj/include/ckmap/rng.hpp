#pragma once

#include <cmath>
#include <cstdint>

namespace ckmap {

/// Deterministic counter-free PRNG (splitmix64 core) with derived substreams.
///
/// std::mt19937 + std::normal_distribution are not bit-stable across standard
/// library implementations, and several contracts here (dataset generation,
/// weight init, noise injection) promise bit-reproducible output for a given
/// seed. This generator is ~30 lines and fully specified.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix(0x9e3779b97f4a7c15ull, seed)) {}

  /// Independent substream keyed by up to three tags, e.g. (block, sample).
  Rng derive(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    return Rng(mix(mix(mix(state_, a), b), c), 0);
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (pairs cached).
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_index(std::uint64_t n) { return next_u64() % n; }

 private:
  Rng(std::uint64_t raw_state, int) : state_(raw_state) {}

  static std::uint64_t mix(std::uint64_t h, std::uint64_t k) {
    h ^= k + 0x9e3779b97f4a7c15ull + (h << 6) + (h >> 2);
    h *= 0xff51afd7ed558ccdull;
    h ^= h >> 33;
    return h;
  }

  std::uint64_t state_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace ckmap
