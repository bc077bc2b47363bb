#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace bregdistill {

// Seeded random stream. Uniform and normal variates are derived from the raw
// 64-bit engine output with fixed formulas so that sequences are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal (Box-Muller, pairs are cached).
  double normal();

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n);

  // Independent child stream; does not advance this stream.
  Rng derive(std::uint64_t stream) const;

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace bregdistill
