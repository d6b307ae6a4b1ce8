#pragma once

#include <Eigen/Dense>

#include <cstdint>

namespace ospde {

/// Increments of a truncated family of independent Brownian motions on a
/// uniform time lattice. Row k holds (dB^1_k, ..., dB^J_k) for the step
/// t_k -> t_{k+1}. Immutable after creation; regeneration from the same seed
/// is bit-identical.
struct SamplePath {
  std::uint64_t seed = 0;
  int truncation = 0;  ///< J, number of Brownian components
  double dt = 0.0;
  int steps = 0;
  bool antithetic = false;
  Eigen::MatrixXd increments;  ///< steps x J, each entry N(0, dt)

  /// B^j at t_k (prefix sum of increments), k in [0, steps].
  double value(int j, int k) const;
};

/// Draws the full increment array from `seed`. Rejects dt <= 0, steps < 1,
/// J < 0. J = 0 yields an empty column block (deterministic evolution).
SamplePath sample_path(std::uint64_t seed, int truncation, double dt, int steps);

/// Negated increments, same seed and metadata, antithetic flag toggled.
SamplePath antithetic(const SamplePath& path);

/// Aggregates consecutive increments by `factor` (the same Brownian path on
/// a coarser lattice). steps must be divisible by factor.
SamplePath coarsen(const SamplePath& path, int factor);

}  // namespace ospde
