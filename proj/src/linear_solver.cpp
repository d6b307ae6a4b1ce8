#include "ospde/linear_solver.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace ospde {

namespace {

void check_path(const ProblemSpec& spec, const SamplePath& path) {
  if (path.steps != spec.steps())
    throw std::invalid_argument("path step count does not match the time lattice");
  if (std::abs(path.dt - spec.dt) > 1e-12 * std::max(1.0, spec.dt))
    throw std::invalid_argument("path dt does not match the time lattice");
  if (path.truncation != spec.noise_truncation)
    throw std::invalid_argument("path truncation does not match spec");
  if (spec.coeffs.noise_components != spec.noise_truncation)
    throw std::invalid_argument("coefficient noise components do not match truncation J");
  if (spec.initial.size() != spec.grid->num_cells())
    throw std::invalid_argument("initial datum length does not match grid");
}

Grad grad_at(const Eigen::MatrixXd& grad, int cell, int dim) {
  Grad z;
  z.dim = dim;
  z.g[0] = grad(cell, 0);
  if (dim == 2) z.g[1] = grad(cell, 1);
  return z;
}

}  // namespace

CoeffSlice evaluate_slice(const ProblemSpec& spec, double t, const Field& y,
                          const Eigen::MatrixXd& grad, std::uint64_t path_seed) {
  const auto& grid = *spec.grid;
  const auto& op = *spec.op;
  const int n = grid.num_cells();
  const int d = grid.dimension;
  const int J = spec.coeffs.noise_components;
  CoeffCtx ctx{path_seed};

  CoeffSlice s;
  s.f.resize(n);
  s.g.resize(n, d);
  s.h.resize(n, J);
  s.l_face.resize(grid.boundary_faces.size());

  std::array<double, 2> gv{0.0, 0.0};
  std::vector<double> hv(static_cast<std::size_t>(std::max(1, J)));
  for (int i = 0; i < n; ++i) {
    const Point x = grid.cell_center(i);
    const Grad z = grad_at(grad, i, d);
    s.f(i) = spec.coeffs.f(ctx, t, x, y(i), z);
    spec.coeffs.g(ctx, t, x, y(i), z, gv.data());
    for (int c = 0; c < d; ++c) s.g(i, c) = gv[static_cast<std::size_t>(c)];
    if (J > 0) {
      spec.coeffs.h(ctx, t, x, y(i), z, hv.data());
      for (int j = 0; j < J; ++j) s.h(i, j) = hv[static_cast<std::size_t>(j)];
    }
  }
  for (std::size_t b = 0; b < grid.boundary_faces.size(); ++b) {
    const auto& bf = grid.boundary_faces[b];
    s.l_face[b] = spec.coeffs.l(ctx, t, bf.center, y(bf.cell));
  }

  // source = f + div_h(g) + boundary injection of (l - g.n)
  s.source = s.f;
  const double inv_vol = 1.0 / grid.cell_volume;
  for (const auto& fc : op.faces) {
    const double gf = 0.5 * (s.g(fc.left, fc.axis) + s.g(fc.right, fc.axis));
    const double flux = gf * fc.area * inv_vol;
    s.source(fc.left) += flux;
    s.source(fc.right) -= flux;
  }
  for (std::size_t b = 0; b < grid.boundary_faces.size(); ++b) {
    const auto& bf = grid.boundary_faces[b];
    const double g_dot_n = bf.sign * s.g(bf.cell, bf.axis);
    s.source(bf.cell) += g_dot_n * bf.area * inv_vol;                     // one-sided g flux
    s.source(bf.cell) += (s.l_face[b] - g_dot_n) * bf.area * inv_vol;     // (l - g.n) injection
  }
  return s;
}

double gradient_pairing(const DiscreteOperator& op, const Eigen::MatrixXd& g_cells,
                        const Field& phi) {
  double acc = 0.0;
  for (const auto& fc : op.faces) {
    const double gf = 0.5 * (g_cells(fc.left, fc.axis) + g_cells(fc.right, fc.axis));
    acc += gf * (phi(fc.right) - phi(fc.left)) * fc.area;
  }
  return acc;
}

double boundary_pairing(const SpatialGrid& grid, const std::vector<double>& l_face,
                        const Field& phi) {
  double acc = 0.0;
  for (std::size_t b = 0; b < grid.boundary_faces.size(); ++b) {
    const auto& bf = grid.boundary_faces[b];
    acc += l_face[b] * phi(bf.cell) * bf.area;
  }
  return acc;
}

SemiImplicitStepper::SemiImplicitStepper(const ProblemSpec& spec)
    : dt_(spec.dt),
      max_sweeps_(spec.solver.max_sweeps),
      tol_inner_(spec.solver.tol_inner) {
  const int n = spec.grid->num_cells();
  Eigen::SparseMatrix<double> eye(n, n);
  eye.setIdentity();
  system_ = eye - dt_ * spec.op->matrix;
  system_rows_ = system_;
  factorization_.compute(system_);
  if (factorization_.info() != Eigen::Success)
    throw std::runtime_error("factorization of (I - dt L) failed");
}

Field SemiImplicitStepper::assemble_rhs(const Field& u_k, const CoeffSlice& slice,
                                        const Eigen::Ref<const Eigen::RowVectorXd>& dB) const {
  Field rhs = u_k + dt_ * slice.source;
  if (slice.h.cols() > 0 && dB.size() > 0) rhs += slice.h * dB.transpose();
  return rhs;
}

Field SemiImplicitStepper::solve_linear(const Field& rhs, int step_index) const {
  Field u = factorization_.solve(rhs);
  if (factorization_.info() != Eigen::Success || !u.allFinite()) {
    const auto& d = factorization_.vectorD();
    const double cond = d.maxCoeff() / std::max(d.minCoeff(), 1e-300);
    throw std::runtime_error("linear solve failed at step " + std::to_string(step_index) +
                             " (diagonal condition estimate " + std::to_string(cond) + ")");
  }
  return u;
}

Field SemiImplicitStepper::solve_penalized(const Field& rhs, const Field& obstacle_row,
                                           double penalty_level, int step_index, Field* penalty,
                                           InnerSolveInfo* info) const {
  if (!(penalty_level > 0.0)) throw std::invalid_argument("penalty level must be positive");
  const double ndt = penalty_level * dt_;
  const int n = static_cast<int>(rhs.size());

  // Active-set policy iteration on the piecewise-linear system
  //   (I - dt L) u - ndt * (u - S)^- = rhs.
  // Each pass solves its active set exactly, so the iteration count does not
  // depend on the conditioning of (I - dt L). The tolerance is relative to
  // the field scale so oversized Picard iterates still resolve and reach the
  // divergence detector instead of failing here.
  Field u = solve_linear(rhs, step_index);  // penalty-free start
  std::vector<bool> active(static_cast<std::size_t>(n), false);
  InnerSolveInfo local;
  double change = std::numeric_limits<double>::infinity();
  double scale = 1.0;
  bool stable = false;
  for (int pass = 0; pass < max_sweeps_; ++pass) {
    bool set_changed = false;
    bool any_active = false;
    for (int i = 0; i < n; ++i) {
      const bool now = u(i) < obstacle_row(i);
      if (now != active[static_cast<std::size_t>(i)]) set_changed = true;
      any_active = any_active || now;
      active[static_cast<std::size_t>(i)] = now;
    }
    if ((pass == 0 && !any_active) || (pass > 0 && !set_changed)) {
      // the previous solve already satisfied this active set exactly
      stable = true;
      break;
    }
    ++local.sweeps;

    Eigen::SparseMatrix<double> system = system_;
    Field b = rhs;
    for (int i = 0; i < n; ++i) {
      if (active[static_cast<std::size_t>(i)]) {
        system.coeffRef(i, i) += ndt;
        b(i) += ndt * obstacle_row(i);
      }
    }
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(system);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("penalized system factorization failed at step " +
                               std::to_string(step_index));
    const Field next = solver.solve(b);
    if (!next.allFinite())
      throw std::runtime_error("penalized step " + std::to_string(step_index) +
                               " rejected: non-finite update");
    change = (next - u).cwiseAbs().maxCoeff();
    u = next;
    scale = std::max(1.0, u.cwiseAbs().maxCoeff());
  }
  local.final_change = stable ? 0.0 : change;
  local.converged = stable || change <= tol_inner_ * scale;
  if (info != nullptr) *info = local;
  if (!local.converged) {
    throw std::runtime_error("penalized inner solve did not converge at step " +
                             std::to_string(step_index) + ": change " +
                             std::to_string(change) + " after " +
                             std::to_string(local.sweeps) + " passes (n = " +
                             std::to_string(penalty_level) + ")");
  }
  if (penalty != nullptr) {
    penalty->resize(n);
    for (int i = 0; i < n; ++i)
      (*penalty)(i) = penalty_level * std::max(obstacle_row(i) - u(i), 0.0);
  }
  return u;
}

Field step(const Field& u_k, const ProblemSpec& spec, const SamplePath& path, int k) {
  check_path(spec, path);
  require_contraction(spec);
  if (!u_k.allFinite()) throw std::invalid_argument("state is non-finite before the step");
  SemiImplicitStepper stepper(spec);
  const Eigen::MatrixXd grad = reconstruct_gradient(*spec.grid, u_k);
  const CoeffSlice slice = evaluate_slice(spec, k * spec.dt, u_k, grad, path.seed);
  const Field rhs = stepper.assemble_rhs(u_k, slice, path.increments.row(k));
  Field u = stepper.solve_linear(rhs, k);
  if (!u.allFinite()) throw std::runtime_error("step rejected: non-finite update");
  return u;
}

FieldTrajectory solve(const ProblemSpec& spec, const SamplePath& path,
                      const FieldTrajectory* frozen) {
  check_path(spec, path);
  require_contraction(spec);
  spec.validate_lattice();

  const int n = spec.grid->num_cells();
  const int K = spec.steps();
  if (frozen != nullptr && (frozen->steps() != K || frozen->cells() != n))
    throw std::invalid_argument("frozen trajectory shape does not match the lattice");

  FieldTrajectory traj;
  traj.path_seed = path.seed;
  traj.dt = spec.dt;
  traj.values.resize(K + 1, n);
  traj.values.row(0) = spec.initial.transpose();
  if (spec.solver.store_gradients)
    traj.gradients.assign(static_cast<std::size_t>(spec.grid->dimension),
                          Eigen::MatrixXd::Zero(K + 1, n));

  SemiImplicitStepper stepper(spec);
  Field u = spec.initial;
  for (int k = 0; k < K; ++k) {
    const Field y = (frozen != nullptr) ? frozen->at(k) : u;
    const Eigen::MatrixXd grad = reconstruct_gradient(*spec.grid, y);
    if (spec.solver.store_gradients)
      for (int c = 0; c < spec.grid->dimension; ++c)
        traj.gradients[static_cast<std::size_t>(c)].row(k) = grad.col(c).transpose();
    const CoeffSlice slice = evaluate_slice(spec, k * spec.dt, y, grad, path.seed);
    const Field rhs = stepper.assemble_rhs(u, slice, path.increments.row(k));
    u = stepper.solve_linear(rhs, k);
    if (!u.allFinite())
      throw std::runtime_error("step " + std::to_string(k) + " rejected: non-finite update");
    traj.values.row(k + 1) = u.transpose();
  }
  if (spec.solver.store_gradients) {
    const Eigen::MatrixXd grad = reconstruct_gradient(*spec.grid, u);
    for (int c = 0; c < spec.grid->dimension; ++c)
      traj.gradients[static_cast<std::size_t>(c)].row(K) = grad.col(c).transpose();
  }
  return traj;
}

FieldTrajectory mild_oracle(const ProblemSpec& spec, const SamplePath& path) {
  check_path(spec, path);
  spec.validate_lattice();
  if (spec.coeffs.f_depends_yz || spec.coeffs.h_depends_yz)
    throw std::invalid_argument("mild oracle requires additive f and h");
  if (!spec.coeffs.g_zero || !spec.coeffs.l_zero)
    throw std::invalid_argument("mild oracle requires zero g and l");
  const int n = spec.grid->num_cells();
  if (n > 200) throw std::invalid_argument("mild oracle limited to 200 cells");

  const int K = spec.steps();
  const int J = spec.coeffs.noise_components;
  const Eigen::MatrixXd propagator =
      matrix_exponential(spec.dt * Eigen::MatrixXd(spec.op->matrix));

  FieldTrajectory traj;
  traj.path_seed = path.seed;
  traj.dt = spec.dt;
  traj.values.resize(K + 1, n);
  traj.values.row(0) = spec.initial.transpose();

  CoeffCtx ctx{path.seed};
  Grad z0;
  z0.dim = spec.grid->dimension;
  std::vector<double> hv(static_cast<std::size_t>(std::max(1, J)));

  Field w = spec.initial;
  for (int k = 0; k < K; ++k) {
    const double t = k * spec.dt;
    Field incr = Field::Zero(n);
    for (int i = 0; i < n; ++i) {
      const Point x = spec.grid->cell_center(i);
      incr(i) = spec.dt * spec.coeffs.f(ctx, t, x, 0.0, z0);
      if (J > 0) {
        spec.coeffs.h(ctx, t, x, 0.0, z0, hv.data());
        for (int j = 0; j < J; ++j) incr(i) += hv[static_cast<std::size_t>(j)] * path.increments(k, j);
      }
    }
    w = propagator * (w + incr);
    traj.values.row(k + 1) = w.transpose();
  }
  return traj;
}

std::pair<FieldTrajectory, FieldTrajectory> solve_spde_pair(const ProblemSpec& spec,
                                                            const ProblemSpec& spec_prime,
                                                            const SamplePath& path) {
  if (spec.grid != spec_prime.grid || spec.op != spec_prime.op)
    throw std::invalid_argument("paired solves must share the grid and operator");
  if (spec.coeffs.gh_signature.empty() ||
      spec.coeffs.gh_signature != spec_prime.coeffs.gh_signature)
    throw std::invalid_argument("paired solves must share g and h");
  if (spec.dt != spec_prime.dt || spec.horizon != spec_prime.horizon ||
      spec.noise_truncation != spec_prime.noise_truncation)
    throw std::invalid_argument("paired solves must share the lattice and truncation");
  return {solve(spec, path), solve(spec_prime, path)};
}

Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a) {
  if (a.rows() != a.cols()) throw std::invalid_argument("matrix exponential needs a square matrix");
  const int n = static_cast<int>(a.rows());
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);

  static const double b[] = {64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
                             1187353796428800.0,  129060195264000.0,   10559470521600.0,
                             670442572800.0,      33522128640.0,       1323241920.0,
                             40840800.0,          960960.0,            16380.0,
                             182.0,               1.0};
  constexpr double theta13 = 5.371920351148152;

  const double norm1 = a.cwiseAbs().colwise().sum().maxCoeff();
  int squarings = 0;
  if (norm1 > theta13)
    squarings = static_cast<int>(std::ceil(std::log2(norm1 / theta13)));
  const Eigen::MatrixXd as = a / std::pow(2.0, squarings);

  const Eigen::MatrixXd a2 = as * as;
  const Eigen::MatrixXd a4 = a2 * a2;
  const Eigen::MatrixXd a6 = a2 * a4;
  const Eigen::MatrixXd u =
      as * (a6 * (b[13] * a6 + b[11] * a4 + b[9] * a2) + b[7] * a6 + b[5] * a4 + b[3] * a2 +
            b[1] * eye);
  const Eigen::MatrixXd v =
      a6 * (b[12] * a6 + b[10] * a4 + b[8] * a2) + b[6] * a6 + b[4] * a4 + b[2] * a2 +
      b[0] * eye;

  Eigen::MatrixXd f = (v - u).partialPivLu().solve(v + u);
  for (int s = 0; s < squarings; ++s) f = f * f;
  return f;
}

}  // namespace ospde
