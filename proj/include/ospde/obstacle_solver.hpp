#pragma once

#include <utility>
#include <vector>

#include "ospde/linear_solver.hpp"

namespace ospde {

/// Discrete nonnegative reaction measure on time-space cells. Row k carries
/// the mass deposited during (t_k, t_{k+1}]:
///   nu_{k,i} = n * (u_{k+1,i} - S_{k,i})^- * dt * cell_volume.
struct RegularMeasure {
  Eigen::MatrixXd mass;  ///< steps x cells, all entries >= 0

  double total() const { return mass.size() > 0 ? mass.sum() : 0.0; }
};

/// Output of the penalized obstacle solve.
struct ObstacleSolution {
  FieldTrajectory trajectory;
  RegularMeasure measure;
  Eigen::MatrixXd obstacle;  ///< realized S, (steps+1) x cells
  double penalty_level = 0.0;  ///< final n of the schedule
  int picard_iterations = 0;
  double picard_gap = 0.0;
  double max_violation = 0.0;  ///< reported max (S - u)^+ over all nodes/steps
};

/// Realizes the obstacle on the lattice: direct mode samples the user field
/// (and validates S_0 <= xi), driven mode solves the linear driving SPDE on
/// the same path and adds the nonpositive offset.
Eigen::MatrixXd build_obstacle(const ProblemSpec& spec, const SamplePath& path);

/// The linear problem solved by the driving process of a driven obstacle.
ProblemSpec obstacle_driver_spec(const ProblemSpec& spec);

/// One penalized semi-implicit step; returns (u_{k+1}, nu row).
std::pair<Field, Field> penalized_step(const Field& u_k, const Field& obstacle_row,
                                       double penalty_level, const ProblemSpec& spec,
                                       const SamplePath& path, int k);

/// Penalized solve with Picard iteration on the coefficient arguments and
/// warm-started refinement along the penalty schedule. Requires a positive
/// contraction margin (see SolverOptions::safety_margin) unless forced.
ObstacleSolution solve_obstacle(const ProblemSpec& spec, const SamplePath& path);
ObstacleSolution solve_obstacle(const ProblemSpec& spec, const SamplePath& path,
                                const std::vector<double>& n_schedule);

/// Smallest-potential approximation: deterministic penalized relaxations of
/// the given trajectory, one per penalty level, increasing in n.
std::vector<FieldTrajectory> reflected_potential_sequence(
    const ProblemSpec& spec, const FieldTrajectory& target, const Field& initial_plus,
    const std::vector<double>& n_schedule);

/// The largest-n iterate of the sequence above.
FieldTrajectory reflected_potential(const ProblemSpec& spec, const FieldTrajectory& target,
                                    const Field& initial_plus,
                                    const std::vector<double>& n_schedule);

/// Minimality defect sum_{k,i} (u_{k,i} - S_{k,i})^+ * nu_{k,i} (nonnegative).
double skorokhod_gap(const FieldTrajectory& traj, const RegularMeasure& measure,
                     const Eigen::MatrixXd& obstacle);
double skorokhod_gap(const ObstacleSolution& sol);

}  // namespace ospde
