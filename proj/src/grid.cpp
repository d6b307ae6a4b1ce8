#include "ospde/grid.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ospde/rng.hpp"

namespace ospde {

namespace {

void check_field_size(const Field& u, int n, const char* what) {
  if (u.size() != n) {
    throw std::invalid_argument(std::string(what) + ": field length " +
                                std::to_string(u.size()) + " does not match " +
                                std::to_string(n));
  }
}

}  // namespace

double SpatialGrid::perimeter() const {
  double p = 0.0;
  for (const auto& f : boundary_faces) p += f.area;
  return p;
}

Point SpatialGrid::cell_center(int idx) const {
  Point p;
  p.dim = dimension;
  if (dimension == 1) {
    p.coord[0] = (idx + 0.5) * spacing[0];
  } else {
    const int ix = idx % cells[0];
    const int iy = idx / cells[0];
    p.coord[0] = (ix + 0.5) * spacing[0];
    p.coord[1] = (iy + 0.5) * spacing[1];
  }
  return p;
}

EllipticCoefficients EllipticCoefficients::constant(const SpatialGrid& grid, double a) {
  if (a <= 0.0) throw std::invalid_argument("diffusion coefficient must be positive");
  EllipticCoefficients c;
  c.dimension = grid.dimension;
  const int d = grid.dimension;
  c.values = Eigen::MatrixXd::Zero(grid.num_cells(), d * d);
  for (int i = 0; i < grid.num_cells(); ++i)
    for (int k = 0; k < d; ++k) c.values(i, k * d + k) = a;
  c.lambda_min = a;
  c.lambda_max = a;
  return c;
}

EllipticCoefficients EllipticCoefficients::isotropic(const SpatialGrid& grid, const Field& a,
                                                     double lambda, double Lambda) {
  check_field_size(a, grid.num_cells(), "isotropic coefficients");
  EllipticCoefficients c;
  c.dimension = grid.dimension;
  const int d = grid.dimension;
  c.values = Eigen::MatrixXd::Zero(grid.num_cells(), d * d);
  for (int i = 0; i < grid.num_cells(); ++i)
    for (int k = 0; k < d; ++k) c.values(i, k * d + k) = a(i);
  c.lambda_min = lambda;
  c.lambda_max = Lambda;
  return c;
}

EllipticCoefficients EllipticCoefficients::diagonal(const SpatialGrid& grid, const Field& axx,
                                                    const Field& ayy, double lambda,
                                                    double Lambda) {
  if (grid.dimension != 2) throw std::invalid_argument("diagonal tensor requires a 2D grid");
  check_field_size(axx, grid.num_cells(), "diagonal coefficients (xx)");
  check_field_size(ayy, grid.num_cells(), "diagonal coefficients (yy)");
  EllipticCoefficients c;
  c.dimension = 2;
  c.values = Eigen::MatrixXd::Zero(grid.num_cells(), 4);
  c.values.col(0) = axx;
  c.values.col(3) = ayy;
  c.lambda_min = lambda;
  c.lambda_max = Lambda;
  return c;
}

bool EllipticCoefficients::is_symmetric(double tol) const {
  const int d = dimension;
  for (int c = 0; c < values.rows(); ++c)
    for (int i = 0; i < d; ++i)
      for (int j = i + 1; j < d; ++j)
        if (std::abs(entry(c, i, j) - entry(c, j, i)) > tol) return false;
  return true;
}

SpatialGrid build_grid(int dimension, const std::vector<double>& extents,
                       const std::vector<int>& cells_per_axis) {
  if (dimension != 1 && dimension != 2)
    throw std::invalid_argument("grid dimension must be 1 or 2");
  if (static_cast<int>(extents.size()) != dimension ||
      static_cast<int>(cells_per_axis.size()) != dimension)
    throw std::invalid_argument("extents/cells arity must match dimension");
  for (double e : extents)
    if (!(e > 0.0)) throw std::invalid_argument("extents must be positive");
  for (int n : cells_per_axis)
    if (n < 2) throw std::invalid_argument("need at least 2 cells per axis");

  SpatialGrid g;
  g.dimension = dimension;
  for (int k = 0; k < dimension; ++k) {
    g.extents[static_cast<std::size_t>(k)] = extents[static_cast<std::size_t>(k)];
    g.cells[static_cast<std::size_t>(k)] = cells_per_axis[static_cast<std::size_t>(k)];
    g.spacing[static_cast<std::size_t>(k)] =
        extents[static_cast<std::size_t>(k)] / cells_per_axis[static_cast<std::size_t>(k)];
  }
  g.cell_volume = g.spacing[0] * (dimension == 2 ? g.spacing[1] : 1.0);

  if (dimension == 1) {
    const int n = g.cells[0];
    g.boundary_nodes = {0, n - 1};
    g.boundary_weights = {1.0, 1.0};
    BoundaryFace lo{0, 0, -1, 1.0, Point{{0.0, 0.0}, 1}};
    BoundaryFace hi{n - 1, 0, +1, 1.0, Point{{g.extents[0], 0.0}, 1}};
    g.boundary_faces = {lo, hi};
  } else {
    const int nx = g.cells[0];
    const int ny = g.cells[1];
    std::vector<double> weight(static_cast<std::size_t>(nx) * ny, 0.0);
    auto add_face = [&](int ix, int iy, int axis, int sign) {
      const int cell = ix + iy * nx;
      BoundaryFace f;
      f.cell = cell;
      f.axis = axis;
      f.sign = sign;
      f.area = (axis == 0) ? g.spacing[1] : g.spacing[0];
      f.center.dim = 2;
      if (axis == 0) {
        f.center.coord[0] = (sign < 0) ? 0.0 : g.extents[0];
        f.center.coord[1] = (iy + 0.5) * g.spacing[1];
      } else {
        f.center.coord[0] = (ix + 0.5) * g.spacing[0];
        f.center.coord[1] = (sign < 0) ? 0.0 : g.extents[1];
      }
      g.boundary_faces.push_back(f);
      weight[static_cast<std::size_t>(cell)] += f.area;
    };
    for (int iy = 0; iy < ny; ++iy) {
      add_face(0, iy, 0, -1);
      add_face(nx - 1, iy, 0, +1);
    }
    for (int ix = 0; ix < nx; ++ix) {
      add_face(ix, 0, 1, -1);
      add_face(ix, ny - 1, 1, +1);
    }
    for (int c = 0; c < nx * ny; ++c) {
      if (weight[static_cast<std::size_t>(c)] > 0.0) {
        g.boundary_nodes.push_back(c);
        g.boundary_weights.push_back(weight[static_cast<std::size_t>(c)]);
      }
    }
  }
  return g;
}

namespace {

double harmonic_face(double a, double b) {
  if (a == b) return a;
  return 2.0 * a * b / (a + b);
}

void probe_ellipticity(const EllipticCoefficients& coeff) {
  const int d = coeff.dimension;
  std::vector<std::array<double, 2>> dirs;
  dirs.push_back({1.0, 0.0});
  if (d == 2) {
    dirs.push_back({0.0, 1.0});
    dirs.push_back({M_SQRT1_2, M_SQRT1_2});
    dirs.push_back({M_SQRT1_2, -M_SQRT1_2});
  }
  detail::SplitMix64 rng(0x9e377);
  for (int k = 0; k < 8; ++k) {
    double vx = detail::normal01(rng);
    double vy = (d == 2) ? detail::normal01(rng) : 0.0;
    const double nrm = std::sqrt(vx * vx + vy * vy);
    if (nrm < 1e-8) continue;
    dirs.push_back({vx / nrm, vy / nrm});
  }
  const double slack = 1e-10 * std::max(1.0, coeff.lambda_max);
  for (int c = 0; c < coeff.values.rows(); ++c) {
    for (const auto& xi : dirs) {
      double q = 0.0;
      for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) q += xi[static_cast<std::size_t>(i)] * coeff.entry(c, i, j) * xi[static_cast<std::size_t>(j)];
      if (q < coeff.lambda_min - slack || q > coeff.lambda_max + slack) {
        char buf[160];
        std::snprintf(buf, sizeof(buf),
                      "ellipticity violated at cell %d: xi'a xi = %.6g outside [%.6g, %.6g]",
                      c, q, coeff.lambda_min, coeff.lambda_max);
        throw std::invalid_argument(buf);
      }
    }
  }
}

}  // namespace

DiscreteOperator assemble_operator(std::shared_ptr<const SpatialGrid> grid,
                                   const EllipticCoefficients& coeff) {
  if (!grid) throw std::invalid_argument("assemble_operator: null grid");
  if (coeff.dimension != grid->dimension)
    throw std::invalid_argument("coefficient dimension does not match grid");
  if (coeff.values.rows() != grid->num_cells())
    throw std::invalid_argument("coefficient cell count does not match grid");
  if (!coeff.is_symmetric())
    throw std::invalid_argument("diffusion tensor must be symmetric at every cell");
  if (grid->dimension == 2) {
    for (int c = 0; c < grid->num_cells(); ++c)
      if (coeff.entry(c, 0, 1) != 0.0)
        throw std::invalid_argument("2D assembly supports diagonal tensors only");
  }
  probe_ellipticity(coeff);

  DiscreteOperator op;
  op.grid = grid;
  const double vol = grid->cell_volume;

  auto add_face = [&](int c1, int c2, int axis) {
    const double a1 = coeff.entry(c1, axis, axis);
    const double a2 = coeff.entry(c2, axis, axis);
    const double af = harmonic_face(a1, a2);
    const double dist = grid->spacing[static_cast<std::size_t>(axis)];
    const double area = (grid->dimension == 1) ? 1.0
                        : (axis == 0 ? grid->spacing[1] : grid->spacing[0]);
    op.faces.push_back({c1, c2, axis, area, dist, af * area / dist});
  };

  if (grid->dimension == 1) {
    for (int i = 0; i + 1 < grid->cells[0]; ++i) add_face(i, i + 1, 0);
  } else {
    const int nx = grid->cells[0];
    const int ny = grid->cells[1];
    for (int iy = 0; iy < ny; ++iy)
      for (int ix = 0; ix + 1 < nx; ++ix) add_face(ix + iy * nx, ix + 1 + iy * nx, 0);
    for (int iy = 0; iy + 1 < ny; ++iy)
      for (int ix = 0; ix < nx; ++ix) add_face(ix + iy * nx, ix + (iy + 1) * nx, 1);
  }

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(op.faces.size() * 4);
  for (const auto& f : op.faces) {
    const double w = f.coeff / vol;
    trip.emplace_back(f.left, f.right, w);
    trip.emplace_back(f.right, f.left, w);
    trip.emplace_back(f.left, f.left, -w);
    trip.emplace_back(f.right, f.right, -w);
  }
  op.matrix.resize(grid->num_cells(), grid->num_cells());
  op.matrix.setFromTriplets(trip.begin(), trip.end());
  return op;
}

Field DiscreteOperator::apply(const Field& u) const {
  check_field_size(u, grid->num_cells(), "operator apply");
  Field out = Field::Zero(u.size());
  const double inv_vol = 1.0 / grid->cell_volume;
  for (const auto& f : faces) {
    const double flux = f.coeff * (u(f.right) - u(f.left)) * inv_vol;
    out(f.left) += flux;
    out(f.right) -= flux;
  }
  return out;
}

double DiscreteOperator::energy(const Field& u, const Field& v) const {
  check_field_size(u, grid->num_cells(), "dirichlet form");
  check_field_size(v, grid->num_cells(), "dirichlet form");
  double e = 0.0;
  for (const auto& f : faces)
    e += f.coeff * ((u(f.left) - u(f.right)) * (v(f.left) - v(f.right)));
  return e;
}

Field DiscreteOperator::boundary_source(const std::vector<double>& face_flux) const {
  if (face_flux.size() != grid->boundary_faces.size())
    throw std::invalid_argument("boundary flux arity does not match boundary faces");
  Field b = Field::Zero(grid->num_cells());
  const double inv_vol = 1.0 / grid->cell_volume;
  for (std::size_t k = 0; k < face_flux.size(); ++k) {
    const auto& f = grid->boundary_faces[k];
    b(f.cell) += face_flux[k] * f.area * inv_vol;
  }
  return b;
}

double dirichlet_form(const DiscreteOperator& op, const Field& u, const Field& v) {
  return op.energy(u, v);
}

double boundary_integral(const SpatialGrid& grid, const Field& u, const Field& w) {
  check_field_size(u, grid.num_cells(), "boundary integral (field)");
  if (w.size() != grid.num_boundary())
    throw std::invalid_argument("boundary integral: weight length must equal boundary node count");
  double s = 0.0;
  for (int k = 0; k < grid.num_boundary(); ++k)
    s += u(grid.boundary_nodes[static_cast<std::size_t>(k)]) * w(k) *
         grid.boundary_weights[static_cast<std::size_t>(k)];
  return s;
}

double boundary_norm_sq(const SpatialGrid& grid, const Field& u) {
  double s = 0.0;
  for (int k = 0; k < grid.num_boundary(); ++k) {
    const double ub = u(grid.boundary_nodes[static_cast<std::size_t>(k)]);
    s += ub * ub * grid.boundary_weights[static_cast<std::size_t>(k)];
  }
  return s;
}

double trace_norm_estimate(const SpatialGrid& grid, const DiscreteOperator& op,
                           int trials, std::uint64_t seed) {
  if (trials < 1) throw std::invalid_argument("trace estimate needs trials >= 1");
  const int n = grid.num_cells();

  auto ratio = [&](const Field& u) -> double {
    const double bn = boundary_norm_sq(grid, u);
    const double h1 = grid.norm_sq(u) + op.energy(u);
    if (h1 <= 0.0) return 0.0;
    return std::sqrt(bn / h1);
  };

  double best = ratio(Field::Ones(n));
  for (int t = 0; t < trials; ++t) {
    detail::SplitMix64 rng(seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(t + 1));
    Field u(n);
    const int kind = t % 3;
    if (kind == 0) {
      for (int i = 0; i < n; ++i) u(i) = detail::normal01(rng);
    } else if (kind == 1) {
      // low-frequency cosine mixture
      std::array<double, 4> cx{}, cy{};
      for (auto& c : cx) c = detail::normal01(rng);
      for (auto& c : cy) c = detail::normal01(rng);
      for (int i = 0; i < n; ++i) {
        const Point p = grid.cell_center(i);
        double v = 0.0;
        for (int m = 0; m < 4; ++m) {
          v += cx[static_cast<std::size_t>(m)] * std::cos(m * M_PI * p[0] / grid.extents[0]);
          if (grid.dimension == 2)
            v += cy[static_cast<std::size_t>(m)] * std::cos(m * M_PI * p[1] / grid.extents[1]);
        }
        u(i) = v;
      }
    } else {
      // boundary-localized exponential bump
      const double rate = 0.5 + 4.0 * detail::uniform01(rng);
      const std::size_t pick = static_cast<std::size_t>(
          detail::uniform01(rng) * static_cast<double>(grid.boundary_faces.size()));
      const auto& f = grid.boundary_faces[std::min(pick, grid.boundary_faces.size() - 1)];
      for (int i = 0; i < n; ++i) {
        const Point p = grid.cell_center(i);
        double d2 = 0.0;
        for (int k = 0; k < grid.dimension; ++k) {
          const double dk = p[k] - f.center[k];
          d2 += dk * dk;
        }
        u(i) = std::exp(-rate * std::sqrt(d2));
      }
    }
    best = std::max(best, ratio(u));
  }
  return best;
}

Eigen::MatrixXd reconstruct_gradient(const SpatialGrid& grid, const Field& u) {
  check_field_size(u, grid.num_cells(), "gradient reconstruction");
  Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(grid.num_cells(), grid.dimension);
  if (grid.dimension == 1) {
    const int n = grid.cells[0];
    const double h = grid.spacing[0];
    if (n == 2) {
      grad(0, 0) = (u(1) - u(0)) / h;
      grad(1, 0) = (u(1) - u(0)) / h;
      return grad;
    }
    grad(0, 0) = (u(1) - u(0)) / h;
    grad(n - 1, 0) = (u(n - 1) - u(n - 2)) / h;
    for (int i = 1; i + 1 < n; ++i) grad(i, 0) = (u(i + 1) - u(i - 1)) / (2.0 * h);
  } else {
    const int nx = grid.cells[0];
    const int ny = grid.cells[1];
    const double hx = grid.spacing[0];
    const double hy = grid.spacing[1];
    auto idx = [nx](int ix, int iy) { return ix + iy * nx; };
    for (int iy = 0; iy < ny; ++iy) {
      for (int ix = 0; ix < nx; ++ix) {
        const int c = idx(ix, iy);
        if (ix == 0)
          grad(c, 0) = (u(idx(1, iy)) - u(c)) / hx;
        else if (ix == nx - 1)
          grad(c, 0) = (u(c) - u(idx(nx - 2, iy))) / hx;
        else
          grad(c, 0) = (u(idx(ix + 1, iy)) - u(idx(ix - 1, iy))) / (2.0 * hx);
        if (iy == 0)
          grad(c, 1) = (u(idx(ix, 1)) - u(c)) / hy;
        else if (iy == ny - 1)
          grad(c, 1) = (u(c) - u(idx(ix, ny - 2))) / hy;
        else
          grad(c, 1) = (u(idx(ix, iy + 1)) - u(idx(ix, iy - 1))) / (2.0 * hy);
      }
    }
  }
  return grad;
}

}  // namespace ospde
