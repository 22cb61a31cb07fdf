#pragma once

#include <cstdint>
#include <initializer_list>

namespace mcov {

struct RngSeed {
  std::uint64_t value = 0;
};

/// SplitMix64 finalizer, used for seeding and stream derivation.
std::uint64_t splitmix64(std::uint64_t x);

/// Derives an independent seed for the substream addressed by `path`, e.g.
/// {grid_index, replicate_index, purpose}. Each path component is folded in
/// with a SplitMix64 round, so distinct paths give unrelated generators.
RngSeed derive_seed(RngSeed base, std::initializer_list<std::uint64_t> path);

/// xoshiro256** generator. Output is bit-identical on every platform; nothing
/// here goes through <random> distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(RngSeed seed);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Standard normal via the Marsaglia polar method.
  double normal();
  bool bernoulli(double probability);

 private:
  std::uint64_t s_[4];
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace mcov
