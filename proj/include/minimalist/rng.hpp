#pragma once

#include <cstdint>
#include <random>

namespace minimalist {

/// Seeded 64-bit generator. `split` derives statistically independent
/// child streams, so a sweep can hand every run its own generator without
/// coordinating.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(mix(seed)) {}

  std::uint64_t seed() const { return seed_; }

  Rng split(std::uint64_t stream) const { return Rng(mix(seed_ ^ mix(stream + 0x9e3779b97f4a7c15ULL))); }

  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(engine_); }
  double normal() { return normal_(engine_); }
  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_); }

  std::mt19937_64& engine() { return engine_; }

  /// splitmix64 finalizer
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace minimalist
