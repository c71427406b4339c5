#pragma once

#include <cstdint>
#include <random>

namespace relstab {

// Seeded generator whose output sequence is fixed across standard library
// implementations: only the raw 64-bit engine output is consumed, and all
// derived distributions are computed here rather than through <random>'s
// implementation-defined distribution classes.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  // Uniform integer on [0, bound), unbiased. bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();
  bool coin() { return (engine_() >> 63) != 0; }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// SplitMix64 finalizer; used to decorrelate nearby seeds.
std::uint64_t mix_seed(std::uint64_t x);

}  // namespace relstab
