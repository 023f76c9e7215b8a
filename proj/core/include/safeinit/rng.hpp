#pragma once

#include <cmath>
#include <cstdint>

namespace safeinit {

// Deterministic, platform-independent RNG. splitmix64 is used both as the
// generator and to derive independent per-run streams from a master seed,
// so Monte Carlo workers never share state.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  // Independent stream for (master seed, stream index).
  static Rng stream(std::uint64_t master_seed, std::uint64_t index) {
    Rng mix(master_seed ^ (0x9e3779b97f4a7c15ULL * (index + 1)));
    mix.next_u64();
    return Rng(mix.next_u64());
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Index in [0, n).
  std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

  double normal() {
    // Box-Muller; cache the second deviate.
    if (has_cached_) {
      has_cached_ = false;
      return cached_;
    }
    double u1 = 0.0;
    while (u1 <= 0.0) u1 = uniform01();
    double u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    cached_ = r * std::sin(theta);
    has_cached_ = true;
    return r * std::cos(theta);
  }

 private:
  std::uint64_t state_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

}  // namespace safeinit
