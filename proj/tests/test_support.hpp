#pragma once

#include <memory>

#include "ospde/coefficients.hpp"
#include "ospde/grid.hpp"

namespace ospde::testsupport {

/// 1D problem on [0, extent] with zero coefficients, zero initial datum and
/// no obstacle; tests mutate what they need.
inline ProblemSpec make_spec(int cells, double horizon, double dt, int truncation,
                             double extent = 1.0) {
  auto grid = std::make_shared<const SpatialGrid>(build_grid(1, {extent}, {cells}));
  auto op = std::make_shared<const DiscreteOperator>(
      assemble_operator(grid, EllipticCoefficients::constant(*grid, 1.0)));
  ProblemSpec spec;
  spec.grid = grid;
  spec.op = op;
  spec.coeffs = CoefficientSet::zero(1, truncation);
  spec.initial = Field::Zero(grid->num_cells());
  spec.horizon = horizon;
  spec.dt = dt;
  spec.noise_truncation = truncation;
  spec.lambda = 1.0;
  spec.trace_norm = trace_norm_estimate(*grid, *op, 16);
  return spec;
}

inline ScalarCoeff constant_f(double c) {
  return [c](const CoeffCtx&, double, const Point&, double, const Grad&) { return c; };
}

inline BoundaryCoeff constant_l(double c) {
  return [c](const CoeffCtx&, double, const Point&, double) { return c; };
}

inline NoiseCoeff constant_h(std::vector<double> weights) {
  return [w = std::move(weights)](const CoeffCtx&, double, const Point&, double, const Grad&,
                                  double* out) {
    for (std::size_t j = 0; j < w.size(); ++j) out[j] = w[j];
  };
}

inline VectorCoeff constant_g(double value, int dim) {
  return [value, dim](const CoeffCtx&, double, const Point&, double, const Grad&, double* out) {
    for (int i = 0; i < dim; ++i) out[i] = value;
  };
}

/// Direct zero obstacle (S identically equal to `level`).
inline ObstacleSpec flat_obstacle(double level) {
  ObstacleSpec ob;
  ob.mode = ObstacleMode::direct;
  ob.direct = [level](double, const Point&) { return level; };
  return ob;
}

}  // namespace ospde::testsupport
