#pragma once

#include <cstdint>

#include "greybox/types.h"

namespace greybox {

/// SplitMix64 finalizer. Bijective on 64-bit words.
std::uint64_t mix64(std::uint64_t z);

/// Derives an independent child seed from a parent seed and a tag.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);

/// Counter-based generator: the k-th draw is a pure function of (key, k), so
/// streams are reproducible bit-for-bit on any platform and can be skipped
/// ahead or split without shared state.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0);

  std::uint64_t next_u64();
  /// Uniform on the open interval (0, 1).
  double uniform();
  double uniform(double lo, double hi);
  /// Standard normal via Box-Muller (one variate per pair of uniforms).
  double normal();
  Vector normal_vector(Eigen::Index n);
  /// n x m matrix of independent standard normals, filled column by column.
  Matrix normal_matrix(Eigen::Index n, Eigen::Index m);

  std::uint64_t key() const { return key_; }
  std::uint64_t counter() const { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

/// n points of a scrambled Halton sequence in [0,1)^d, returned column-wise
/// (d x n). Scrambling permutes all digits of every radix (trailing zeros too) with a
/// seeded permutation per dimension and digit position.
PointSet scrambled_halton(int n, int d, std::uint64_t seed);

}  // namespace greybox
