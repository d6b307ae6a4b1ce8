#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>

#include <cstdint>
#include <utility>
#include <vector>

#include "ospde/coefficients.hpp"
#include "ospde/grid.hpp"
#include "ospde/noise.hpp"

namespace ospde {

/// Solution path: nodal fields at t_k = k*dt for k = 0..steps, plus the seed
/// that drove it. Gradients are stored only when requested.
struct FieldTrajectory {
  Eigen::MatrixXd values;  ///< (steps+1) x cells
  std::vector<Eigen::MatrixXd> gradients;  ///< per axis, (steps+1) x cells (optional)
  std::uint64_t path_seed = 0;
  double dt = 0.0;

  int steps() const { return static_cast<int>(values.rows()) - 1; }
  int cells() const { return static_cast<int>(values.cols()); }
  Field at(int k) const { return values.row(k).transpose(); }
};

/// Coefficient values frozen at one time slice (t, y-field, z-field).
struct CoeffSlice {
  Field f;                     ///< cells
  Eigen::MatrixXd g;           ///< cells x d
  Eigen::MatrixXd h;           ///< cells x J
  std::vector<double> l_face;  ///< per boundary face
  Field source;                ///< f + div_h(g) + boundary injection, per cell
};

/// Evaluates (f, g, h, l) at (t, x_i, y_i, z_i) for every cell / boundary
/// face and assembles the per-cell source. y on the boundary is the owning
/// cell's value.
CoeffSlice evaluate_slice(const ProblemSpec& spec, double t, const Field& y,
                          const Eigen::MatrixXd& grad, std::uint64_t path_seed);

/// Face-quadrature pairing sum_f g_f . (phi_right - phi_left) * area, the
/// discrete counterpart of the interior integral of g . grad(phi).
double gradient_pairing(const DiscreteOperator& op, const Eigen::MatrixXd& g_cells,
                        const Field& phi);

/// Sum over boundary faces of l * phi_cell * area.
double boundary_pairing(const SpatialGrid& grid, const std::vector<double>& l_face,
                        const Field& phi);

/// Diagnostics from a penalized inner solve.
struct InnerSolveInfo {
  int sweeps = 0;
  double final_change = 0.0;
  bool converged = true;
};

/// Semi-implicit stepper: implicit in the divergence-form operator, explicit
/// in the nonlinear coefficients. Factorizes (I - dt*L) once and reuses it.
class SemiImplicitStepper {
 public:
  explicit SemiImplicitStepper(const ProblemSpec& spec);

  /// RHS of one step: u_k + dt * source + sum_j h_j dB^j.
  Field assemble_rhs(const Field& u_k, const CoeffSlice& slice,
                     const Eigen::Ref<const Eigen::RowVectorXd>& dB) const;

  /// u_{k+1} = (I - dt L)^{-1} rhs; throws on solver failure or non-finite
  /// result (with a crude condition estimate in the message).
  Field solve_linear(const Field& rhs, int step_index) const;

  /// Penalized solve of (I - dt L) u = rhs + dt * n * (u - S)^-, by monotone
  /// nonlinear Gauss-Seidel warm-started from the penalty-free solution.
  /// On return `penalty` holds n * (u - S)^- per cell.
  Field solve_penalized(const Field& rhs, const Field& obstacle_row, double penalty_level,
                        int step_index, Field* penalty, InnerSolveInfo* info = nullptr) const;

  double dt() const { return dt_; }

 private:
  double dt_ = 0.0;
  int max_sweeps_ = 50;
  double tol_inner_ = 1e-10;
  Eigen::SparseMatrix<double> system_;  ///< I - dt L
  Eigen::SparseMatrix<double, Eigen::RowMajor> system_rows_;
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> factorization_;
};

/// One semi-implicit step (convenience wrapper; `solve` amortizes the
/// factorization across steps).
Field step(const Field& u_k, const ProblemSpec& spec, const SamplePath& path, int k);

/// Full trajectory of the SPDE without obstacle. The optional `frozen`
/// trajectory supplies the (y, z) arguments of the coefficients (Picard
/// outer iterations); by default they are taken from the running solution.
FieldTrajectory solve(const ProblemSpec& spec, const SamplePath& path,
                      const FieldTrajectory* frozen = nullptr);

/// Independent semigroup oracle for additive coefficients: evaluates the
/// mild-solution formula with exp(dt*L) (scaling-and-squaring) and
/// left-endpoint sums on the same lattice and increments. Requires additive
/// f and h, zero g and l, and at most 200 cells.
FieldTrajectory mild_oracle(const ProblemSpec& spec, const SamplePath& path);

/// Two trajectories driven by identical increments; rejects specs that do
/// not share g, h, the grid and the lattice.
std::pair<FieldTrajectory, FieldTrajectory> solve_spde_pair(const ProblemSpec& spec,
                                                            const ProblemSpec& spec_prime,
                                                            const SamplePath& path);

/// Dense matrix exponential by Pade-13 scaling and squaring.
Eigen::MatrixXd matrix_exponential(const Eigen::MatrixXd& a);

}  // namespace ospde
