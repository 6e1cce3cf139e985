#pragma once

#include <cstdint>
#include <span>

namespace acquire {

/// Counter-based pseudo-random generator (SplitMix64 stream).
///
/// The i-th output is a fixed hash of (seed, i), so any draw can be replayed
/// from the seed alone and per-trial streams are cheap to derive.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();

  /// Uniform in [0, 1) with 53-bit resolution.
  double uniform();

  /// Uniform integer in [0, n). Requires n >= 1.
  int uniform_int(int n);

  /// Standard normal via Box-Muller (two uniforms per draw).
  double gaussian();

  /// Index i with probability weights[i] / sum(weights). Weights must be
  /// nonnegative with a positive sum; the returned index has positive weight.
  int sample_weighted(std::span<const double> weights);

  /// Stateless derivation of a child seed for an independent stream.
  static std::uint64_t derive(std::uint64_t base, std::uint64_t stream);

 private:
  std::uint64_t state_;
};

}  // namespace acquire
