#include "ospde/obstacle_solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace ospde {

namespace {

void check_initial_order(const Eigen::MatrixXd& obstacle, const Field& xi) {
  for (int i = 0; i < xi.size(); ++i) {
    if (obstacle(0, i) > xi(i) + 1e-14) {
      throw std::invalid_argument(
          "initial obstacle exceeds the initial datum at cell " + std::to_string(i) +
          " (S_0 = " + std::to_string(obstacle(0, i)) + ", xi = " + std::to_string(xi(i)) +
          "); the obstacle must start below the initial state");
    }
  }
}

}  // namespace

ProblemSpec obstacle_driver_spec(const ProblemSpec& spec) {
  const auto& ob = spec.obstacle;
  if (ob.mode != ObstacleMode::driven)
    throw std::invalid_argument("driver spec requires a driven obstacle");
  if (!ob.driver) throw std::invalid_argument("driven obstacle needs driver coefficients");
  if (ob.driver->f_depends_yz || ob.driver->g_depends_yz || ob.driver->h_depends_yz ||
      ob.driver->l_depends_y)
    throw std::invalid_argument("obstacle driver coefficients must not depend on (y, z)");
  if (ob.driver_initial.size() != spec.grid->num_cells())
    throw std::invalid_argument("driver initial datum length does not match grid");

  ProblemSpec d = spec;
  d.coeffs = *ob.driver;
  d.initial = ob.driver_initial;
  d.obstacle = ObstacleSpec{};
  return d;
}

Eigen::MatrixXd build_obstacle(const ProblemSpec& spec, const SamplePath& path) {
  const auto& ob = spec.obstacle;
  const int n = spec.grid->num_cells();
  const int K = spec.steps();

  if (ob.mode == ObstacleMode::none)
    throw std::invalid_argument("no obstacle configured");

  Eigen::MatrixXd s(K + 1, n);
  if (ob.mode == ObstacleMode::direct) {
    if (!ob.direct) throw std::invalid_argument("direct obstacle needs a field function");
    for (int k = 0; k <= K; ++k)
      for (int i = 0; i < n; ++i)
        s(k, i) = ob.direct(k * spec.dt, spec.grid->cell_center(i));
  } else {
    if (!(ob.offset <= 0.0))
      throw std::invalid_argument("driven obstacle offset must be nonpositive");
    const FieldTrajectory sp = solve(obstacle_driver_spec(spec), path);
    s = sp.values.array() + ob.offset;
  }
  check_initial_order(s, spec.initial);
  return s;
}

std::pair<Field, Field> penalized_step(const Field& u_k, const Field& obstacle_row,
                                       double penalty_level, const ProblemSpec& spec,
                                       const SamplePath& path, int k) {
  if (!(penalty_level > 0.0)) throw std::invalid_argument("penalty level must be positive");
  SemiImplicitStepper stepper(spec);
  const Eigen::MatrixXd grad = reconstruct_gradient(*spec.grid, u_k);
  const CoeffSlice slice = evaluate_slice(spec, k * spec.dt, u_k, grad, path.seed);
  const Field rhs = stepper.assemble_rhs(u_k, slice, path.increments.row(k));
  Field penalty;
  const Field u = stepper.solve_penalized(rhs, obstacle_row, penalty_level, k, &penalty);
  const Field nu_row = penalty * spec.dt * spec.grid->cell_volume;
  return {u, nu_row};
}

namespace {

/// One full penalized time-stepping pass with coefficient arguments frozen
/// at `frozen` (the previous Picard iterate).
void penalized_pass(const ProblemSpec& spec, const SamplePath& path,
                    const SemiImplicitStepper& stepper, const Eigen::MatrixXd& obstacle,
                    double n_level, const FieldTrajectory& frozen, FieldTrajectory* out,
                    RegularMeasure* measure) {
  const int n = spec.grid->num_cells();
  const int K = spec.steps();
  out->path_seed = path.seed;
  out->dt = spec.dt;
  out->values.resize(K + 1, n);
  out->values.row(0) = spec.initial.transpose();
  measure->mass.resize(K, n);

  Field u = spec.initial;
  Field penalty;
  for (int k = 0; k < K; ++k) {
    const Field y = frozen.at(k);
    const Eigen::MatrixXd grad = reconstruct_gradient(*spec.grid, y);
    const CoeffSlice slice = evaluate_slice(spec, k * spec.dt, y, grad, path.seed);
    const Field rhs = stepper.assemble_rhs(u, slice, path.increments.row(k));
    u = stepper.solve_penalized(rhs, obstacle.row(k).transpose(), n_level, k, &penalty);
    if (!u.allFinite())
      throw std::runtime_error("penalized step " + std::to_string(k) +
                               " rejected: non-finite update");
    out->values.row(k + 1) = u.transpose();
    measure->mass.row(k) = (penalty * spec.dt * spec.grid->cell_volume).transpose();
  }
}

double trajectory_gap(const ProblemSpec& spec, const FieldTrajectory& a,
                      const FieldTrajectory& b) {
  double gap = 0.0;
  for (int k = 0; k <= spec.steps(); ++k) {
    const Field d = a.at(k) - b.at(k);
    gap = std::max(gap, std::sqrt(spec.grid->norm_sq(d)));
  }
  return gap;
}

bool coefficients_frozen_irrelevant(const CoefficientSet& c) {
  return !c.f_depends_yz && !c.g_depends_yz && !c.h_depends_yz && !c.l_depends_y;
}

}  // namespace

ObstacleSolution solve_obstacle(const ProblemSpec& spec, const SamplePath& path) {
  return solve_obstacle(spec, path, spec.solver.n_schedule);
}

ObstacleSolution solve_obstacle(const ProblemSpec& spec, const SamplePath& path,
                                const std::vector<double>& n_schedule) {
  spec.validate_lattice();
  require_contraction(spec);
  if (n_schedule.empty()) throw std::invalid_argument("penalty schedule must not be empty");
  for (std::size_t i = 1; i < n_schedule.size(); ++i)
    if (!(n_schedule[i] > n_schedule[i - 1]))
      throw std::invalid_argument("penalty schedule must be increasing");

  const int n = spec.grid->num_cells();
  const int K = spec.steps();
  const Eigen::MatrixXd obstacle = build_obstacle(spec, path);
  SemiImplicitStepper stepper(spec);

  ObstacleSolution sol;
  sol.obstacle = obstacle;

  // warm start: constant-in-time extension of the initial datum
  FieldTrajectory current;
  current.path_seed = path.seed;
  current.dt = spec.dt;
  current.values = spec.initial.transpose().replicate(K + 1, 1);

  const bool single_pass = coefficients_frozen_irrelevant(spec.coeffs);

  for (double n_level : n_schedule) {
    double gap = 0.0;
    int grow_streak = 0;
    double prev_gap = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < spec.solver.max_picard; ++iter) {
      FieldTrajectory next;
      RegularMeasure measure;
      penalized_pass(spec, path, stepper, obstacle, n_level, current, &next, &measure);
      gap = trajectory_gap(spec, next, current);
      current = std::move(next);
      sol.measure = std::move(measure);
      ++sol.picard_iterations;
      if (single_pass || gap <= spec.solver.tol_picard) break;
      if (gap > prev_gap) {
        if (++grow_streak >= 3) {
          const auto verdict = validate_contraction(spec.coeffs, spec.lambda, spec.trace_norm);
          throw std::runtime_error(
              "Picard iteration diverged at penalty level " + std::to_string(n_level) +
              " (gap grew three consecutive iterations to " + std::to_string(gap) +
              "); contraction margin = " + std::to_string(verdict.margin));
        }
      } else {
        grow_streak = 0;
      }
      prev_gap = gap;
    }
    sol.picard_gap = single_pass ? 0.0 : gap;
    sol.penalty_level = n_level;
  }

  sol.trajectory = std::move(current);
  double viol = 0.0;
  for (int k = 0; k <= K; ++k)
    for (int i = 0; i < n; ++i)
      viol = std::max(viol, obstacle(k, i) - sol.trajectory.values(k, i));
  sol.max_violation = std::max(viol, 0.0);
  return sol;
}

std::vector<FieldTrajectory> reflected_potential_sequence(
    const ProblemSpec& spec, const FieldTrajectory& target, const Field& initial_plus,
    const std::vector<double>& n_schedule) {
  spec.validate_lattice();
  if (n_schedule.empty()) throw std::invalid_argument("penalty schedule must not be empty");
  const int n = spec.grid->num_cells();
  const int K = spec.steps();
  if (target.steps() != K || target.cells() != n)
    throw std::invalid_argument("target trajectory shape does not match the lattice");
  if (initial_plus.size() != n)
    throw std::invalid_argument("initial value length does not match grid");

  SemiImplicitStepper stepper(spec);
  std::vector<FieldTrajectory> sequence;
  sequence.reserve(n_schedule.size());
  for (double n_level : n_schedule) {
    FieldTrajectory v;
    v.path_seed = target.path_seed;
    v.dt = spec.dt;
    v.values.resize(K + 1, n);
    v.values.row(0) = initial_plus.transpose();
    Field u = initial_plus;
    Field penalty;
    for (int k = 0; k < K; ++k) {
      // deterministic relaxation onto the target: the obstacle for the
      // implicit step is the target at the arrival time
      u = stepper.solve_penalized(u, target.at(k + 1), n_level, k, &penalty);
      v.values.row(k + 1) = u.transpose();
    }
    sequence.push_back(std::move(v));
  }
  return sequence;
}

FieldTrajectory reflected_potential(const ProblemSpec& spec, const FieldTrajectory& target,
                                    const Field& initial_plus,
                                    const std::vector<double>& n_schedule) {
  auto seq = reflected_potential_sequence(spec, target, initial_plus, n_schedule);
  return std::move(seq.back());
}

double skorokhod_gap(const FieldTrajectory& traj, const RegularMeasure& measure,
                     const Eigen::MatrixXd& obstacle) {
  const int K = static_cast<int>(measure.mass.rows());
  const int n = static_cast<int>(measure.mass.cols());
  if (traj.values.rows() != K + 1 || traj.values.cols() != n ||
      obstacle.rows() != K + 1 || obstacle.cols() != n)
    throw std::invalid_argument("trajectory/measure/obstacle shapes do not match");
  double g = 0.0;
  for (int k = 0; k < K; ++k)
    for (int i = 0; i < n; ++i)
      g += std::max(traj.values(k, i) - obstacle(k, i), 0.0) * measure.mass(k, i);
  return g;
}

double skorokhod_gap(const ObstacleSolution& sol) {
  return skorokhod_gap(sol.trajectory, sol.measure, sol.obstacle);
}

}  // namespace ospde
