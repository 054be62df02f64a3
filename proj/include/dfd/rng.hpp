#pragma once

#include <cstdint>
#include <string_view>

namespace dfd {

// Deterministic PRNG (xoshiro256**), seeded through splitmix64.
//
// Every random decision in the project flows through this class so that runs
// reproduce bit-for-bit across platforms and standard-library versions;
// std::*_distribution is implementation-defined and never used.
//
// Streams fan out from one experiment seed by labeled derivation:
// rng.derive("train/shuffle", epoch) gives an independent child stream.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t next_u64();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Unbiased integer in [0, n). n must be > 0.
  uint64_t uniform_int(uint64_t n);

  // Standard normal via Box-Muller (pair cached).
  double normal();

  // Normal truncated to |z| <= 2 by resampling, scaled to stddev.
  double truncated_normal(double stddev);

  // Gamma(shape alpha, scale 1), Marsaglia-Tsang. alpha > 0.
  double gamma(double alpha);

  // Beta(a, b) from two gamma draws.
  double beta(double a, double b);

  // Child stream keyed on (this stream's seed, label, index). Independent of
  // how many draws were consumed from the parent.
  Rng derive(std::string_view label, uint64_t index = 0) const;

  uint64_t seed() const { return seed_; }

 private:
  uint64_t s_[4];
  uint64_t seed_;
  double cached_normal_ = 0.0;
  bool have_cached_normal_ = false;
};

}  // namespace dfd
