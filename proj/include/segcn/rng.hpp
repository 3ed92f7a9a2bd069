#pragma once

#include <cstdint>
#include <random>

namespace segcn {

// Seeded random stream. The mapping from engine output to doubles and bounded
// integers is fixed here so that streams are reproducible across standard
// library implementations (std distributions are implementation-defined).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);

  std::uint64_t next() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

// Derives an independent seed for a named sub-stream of a base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream);

}  // namespace segcn
