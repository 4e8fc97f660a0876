#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace stc {

// splitmix64 finalizer; used to derive independent streams from a seed.
std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b = 0) noexcept;

// Seeded generator with platform-independent draws. The standard
// distributions are implementation-defined, so bounded integers and unit
// reals are derived from the raw mt19937_64 output here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix_seed(seed)) {}

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n);

  // Uniform in [lo, hi].
  int between(int lo, int hi);

  // Uniform in [0, 1) with 53 random bits.
  double uniform();

  bool bernoulli(double p) { return uniform() < p; }

  // Index drawn with probability proportional to weights (non-negative).
  std::size_t categorical(std::span<const double> weights);

 private:
  std::mt19937_64 engine_;
};

}  // namespace stc
