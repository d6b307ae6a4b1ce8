#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

namespace ospde {

/// Nodal field: one value per cell, ordered by cell index.
using Field = Eigen::VectorXd;

/// A location in the closed domain (cell center or boundary-face center).
struct Point {
  std::array<double, 2> coord{0.0, 0.0};
  int dim = 1;

  double operator[](int i) const { return coord[static_cast<std::size_t>(i)]; }
};

/// One exterior face of a boundary cell, with its outward normal axis/sign.
struct BoundaryFace {
  int cell = 0;
  int axis = 0;     ///< normal direction (0 = x, 1 = y)
  int sign = 1;     ///< outward normal component along `axis` (-1 or +1)
  double area = 1;  ///< (d-1)-dimensional face measure
  Point center;
};

/// Cell-centered mesh on an interval (1D) or axis-aligned rectangle (2D).
///
/// Cells are indexed ix + iy*cells[0]. Boundary bookkeeping is kept both
/// per node (index + aggregated surface weight, the view used by boundary
/// integrals) and per face (used to inject inhomogeneous co-normal flux).
struct SpatialGrid {
  int dimension = 1;
  std::array<double, 2> extents{1.0, 1.0};
  std::array<int, 2> cells{1, 1};
  std::array<double, 2> spacing{0.0, 0.0};
  double cell_volume = 0.0;

  std::vector<int> boundary_nodes;
  std::vector<double> boundary_weights;  ///< aggregated surface measure per boundary node
  std::vector<BoundaryFace> boundary_faces;

  int num_cells() const { return dimension == 1 ? cells[0] : cells[0] * cells[1]; }
  int num_boundary() const { return static_cast<int>(boundary_nodes.size()); }
  double total_volume() const { return dimension == 1 ? extents[0] : extents[0] * extents[1]; }
  double perimeter() const;

  Point cell_center(int idx) const;

  /// Volume-weighted L2 inner product of two nodal fields.
  double inner(const Field& u, const Field& v) const { return u.dot(v) * cell_volume; }
  double norm_sq(const Field& u) const { return inner(u, u); }
};

/// Per-cell symmetric diffusion tensor together with its ellipticity bounds.
///
/// Storage is the full d*d matrix per cell (row-major); 2D assembly accepts
/// diagonal tensors only.
struct EllipticCoefficients {
  int dimension = 1;
  Eigen::MatrixXd values;  ///< num_cells x (d*d), row-major per cell
  double lambda_min = 1.0;  ///< ellipticity lower bound
  double lambda_max = 1.0;  ///< ellipticity upper bound

  static EllipticCoefficients constant(const SpatialGrid& grid, double a);
  static EllipticCoefficients isotropic(const SpatialGrid& grid, const Field& a,
                                        double lambda, double Lambda);
  static EllipticCoefficients diagonal(const SpatialGrid& grid, const Field& axx,
                                       const Field& ayy, double lambda, double Lambda);

  double entry(int cell, int i, int j) const {
    return values(cell, i * dimension + j);
  }
  bool is_symmetric(double tol = 0.0) const;
};

/// An interior face of the mesh; `coeff` is the energy weight a_f * area / dist,
/// so that E(u,v) = sum_f coeff * (u_l - u_r)(v_l - v_r).
struct InteriorFace {
  int left = 0;
  int right = 0;
  int axis = 0;
  double area = 1.0;  ///< (d-1)-dimensional face measure
  double dist = 1.0;  ///< center-to-center distance
  double coeff = 0.0;
};

/// Assembled divergence-form operator div(a grad .) with zero-flux closure.
///
/// The sparse matrix carries units of 1/length^2. Constants are in the kernel
/// exactly when applied through the flux form `apply`.
struct DiscreteOperator {
  std::shared_ptr<const SpatialGrid> grid;
  std::vector<InteriorFace> faces;
  Eigen::SparseMatrix<double> matrix;

  /// L u evaluated face-by-face; exact zero for constant fields.
  Field apply(const Field& u) const;

  /// Dirichlet form E(u, v) = -u^T L v * cell_volume, evaluated in face form
  /// (exactly symmetric, exactly zero on constants, nonnegative on E(u,u)).
  double energy(const Field& u, const Field& v) const;
  double energy(const Field& u) const { return energy(u, u); }

  /// Maps per-boundary-face flux data to a per-cell source (divides by volume).
  Field boundary_source(const std::vector<double>& face_flux) const;
};

/// Builds the cell-centered mesh. Rejects dimension outside {1,2},
/// non-positive extents and fewer than 2 cells per axis.
SpatialGrid build_grid(int dimension, const std::vector<double>& extents,
                       const std::vector<int>& cells_per_axis);

/// Finite-volume assembly with two-point flux (harmonic face coefficient) and
/// zero co-normal flux across exterior faces. Probes the ellipticity sandwich
/// on a fixed direction set and rejects violations.
DiscreteOperator assemble_operator(std::shared_ptr<const SpatialGrid> grid,
                                   const EllipticCoefficients& coeff);

/// E(u, v); throws on size mismatch.
double dirichlet_form(const DiscreteOperator& op, const Field& u, const Field& v);

/// Sum over boundary nodes of u * w * surface weight; w is indexed by
/// boundary-node position (length = num_boundary()).
double boundary_integral(const SpatialGrid& grid, const Field& u, const Field& w);

/// L2 norm on the boundary: sqrt(sum u_b^2 * weight_b).
double boundary_norm_sq(const SpatialGrid& grid, const Field& u);

/// Empirical estimate of the trace operator norm
///   ||Tr|| = sup ||u||_{L2(boundary)} / ||u||_{H1},
/// from the constant field plus `trials` sampled fields (white noise, cosine
/// series, boundary-localized bumps). Monotone nondecreasing in `trials`.
double trace_norm_estimate(const SpatialGrid& grid, const DiscreteOperator& op,
                           int trials, std::uint64_t seed = 0x0359de5eedULL);

/// Cell-centered gradient reconstruction: central differences in the
/// interior, one-sided at boundary cells. Returns num_cells x dimension.
Eigen::MatrixXd reconstruct_gradient(const SpatialGrid& grid, const Field& u);

}  // namespace ospde
