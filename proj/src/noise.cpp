#include "ospde/noise.hpp"

#include <cmath>
#include <stdexcept>

#include "ospde/rng.hpp"

namespace ospde {

double SamplePath::value(int j, int k) const {
  if (j < 0 || j >= truncation) throw std::invalid_argument("component index out of range");
  if (k < 0 || k > steps) throw std::invalid_argument("time index out of range");
  double b = 0.0;
  for (int i = 0; i < k; ++i) b += increments(i, j);
  return b;
}

SamplePath sample_path(std::uint64_t seed, int truncation, double dt, int steps) {
  if (!(dt > 0.0)) throw std::invalid_argument("noise step dt must be positive");
  if (steps < 1) throw std::invalid_argument("need at least one step");
  if (truncation < 0) throw std::invalid_argument("truncation must be nonnegative");

  SamplePath p;
  p.seed = seed;
  p.truncation = truncation;
  p.dt = dt;
  p.steps = steps;
  p.increments.resize(steps, truncation);

  const double scale = std::sqrt(dt);
  detail::SplitMix64 rng(seed);
  for (int k = 0; k < steps; ++k)
    for (int j = 0; j < truncation; ++j)
      p.increments(k, j) = scale * detail::normal01(rng);
  return p;
}

SamplePath antithetic(const SamplePath& path) {
  SamplePath p = path;
  p.increments = -path.increments;
  p.antithetic = !path.antithetic;
  return p;
}

SamplePath coarsen(const SamplePath& path, int factor) {
  if (factor < 1) throw std::invalid_argument("coarsening factor must be >= 1");
  if (path.steps % factor != 0)
    throw std::invalid_argument("steps must be divisible by the coarsening factor");
  SamplePath p;
  p.seed = path.seed;
  p.truncation = path.truncation;
  p.dt = path.dt * factor;
  p.steps = path.steps / factor;
  p.antithetic = path.antithetic;
  p.increments = Eigen::MatrixXd::Zero(p.steps, p.truncation);
  for (int k = 0; k < p.steps; ++k)
    for (int i = 0; i < factor; ++i) p.increments.row(k) += path.increments.row(k * factor + i);
  return p;
}

}  // namespace ospde
