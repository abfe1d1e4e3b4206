#pragma once

#include <cstdint>
#include <random>

// Deterministic random streams. Every stochastic routine derives an
// independent substream from (master seed, stream id, window index), so
// results are reproducible bit-for-bit regardless of how windows are
// scheduled across worker threads. All samplers are implemented here (not
// taken from <random> distributions) so the draw sequence is fixed by this
// code alone.

namespace mirpairs {

// SplitMix64 finalizer; good avalanche, used for seed derivation.
std::uint64_t mix64(std::uint64_t x);

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(mix64(seed)) {}

  // Independent substream keyed by (master, stream, window).
  static Rng substream(std::uint64_t master, std::uint64_t stream, std::uint64_t window);

  std::uint64_t next_u64() { return engine_(); }

  // Uniform double in [0, 1), 53-bit resolution.
  double uniform();

  // Uniform integer in [0, bound); bound > 0. Uses rejection for exactness.
  std::uint64_t uniform_below(std::uint64_t bound);

  // Gaussian sample via Box-Muller; consumes exactly two uniforms.
  double normal(double mean, double sigma);

  // Poisson sample; Knuth inversion below mean 25, Hormann PTRS above.
  std::uint64_t poisson(double mean);

 private:
  std::mt19937_64 engine_;
};

}  // namespace mirpairs
