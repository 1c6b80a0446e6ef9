#pragma once

#include <cstdint>
#include <random>

namespace swarm {

/// splitmix64 step; used to derive independent seed streams from one master seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

/// Deterministic random source. The uniform/normal transforms are written out
/// explicitly instead of going through std:: distributions, so a given seed
/// produces the same draw sequence on every platform/compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), gen_(seed) {}

  /// Uniform in [0, 1).
  double uniform();

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi);

  /// Standard normal via Box-Muller (second value of each pair is cached).
  double normal();

  /// Independent generator for a named sub-stream of this one.
  Rng derive(std::uint64_t stream) const { return Rng(mix_seed(seed_, stream)); }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 gen_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

}  // namespace swarm
