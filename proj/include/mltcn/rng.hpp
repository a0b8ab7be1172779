#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace mltcn {

// SplitMix64 finalizer, used to derive independent seeds for substreams.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seedable, splittable random stream.
//
// Every stream is an mt19937_64 engine whose seed is a hash of the parent seed
// and a stream key, so `Rng(seed).split(i)` yields the same numbers on every
// machine and independently of how many other substreams were drawn. Uniform
// and normal variates are generated here rather than through
// std::*_distribution, whose algorithms are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(mix64(seed)), engine_(seed_) {}

  Rng split(std::uint64_t key) const { return Rng(seed_ ^ mix64(key + 0x632be59bd9b4e019ULL), 0); }
  Rng split(std::uint64_t key1, std::uint64_t key2) const { return split(key1).split(key2); }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u <= 0.0);
    return u;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal by the Box-Muller transform; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_open();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Index in [0, n).
  std::size_t below(std::size_t n) {
    // Rejection sampling removes modulo bias.
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

 private:
  Rng(std::uint64_t raw_seed, int) : seed_(raw_seed), engine_(raw_seed) {}

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mltcn
