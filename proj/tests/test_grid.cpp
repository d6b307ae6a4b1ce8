#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>

#include "ospde/grid.hpp"
#include "ospde/rng.hpp"

using namespace ospde;

namespace {

std::shared_ptr<const SpatialGrid> grid_1d(int cells, double extent = 1.0) {
  return std::make_shared<const SpatialGrid>(build_grid(1, {extent}, {cells}));
}

Field random_field(int n, std::uint64_t seed) {
  detail::SplitMix64 rng(seed);
  Field u(n);
  for (int i = 0; i < n; ++i) u(i) = detail::normal01(rng);
  return u;
}

}  // namespace

TEST_CASE("build_grid: 1D uniform subdivision") {
  const SpatialGrid g = build_grid(1, {1.0}, {4});
  CHECK(g.cell_volume == doctest::Approx(0.25).epsilon(1e-14));
  REQUIRE(g.boundary_nodes.size() == 2);
  CHECK(g.boundary_nodes[0] == 0);
  CHECK(g.boundary_nodes[1] == 3);
  CHECK(g.boundary_weights[0] == 1.0);
  CHECK(g.boundary_weights[1] == 1.0);
  CHECK(g.cell_center(0)[0] == doctest::Approx(0.125));
}

TEST_CASE("build_grid: extent 2 with 8 cells") {
  const SpatialGrid g = build_grid(1, {2.0}, {8});
  CHECK(g.cell_volume == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(g.num_cells() * g.cell_volume == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("build_grid: 2D 3x3") {
  const SpatialGrid g = build_grid(2, {1.0, 1.0}, {3, 3});
  CHECK(g.num_cells() == 9);
  CHECK(g.num_boundary() == 8);
  CHECK(g.cell_volume == doctest::Approx(1.0 / 9.0).epsilon(1e-14));
  CHECK(g.num_cells() * g.cell_volume == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("build_grid: rejects bad arguments") {
  CHECK_THROWS_AS(build_grid(3, {1.0, 1.0, 1.0}, {4, 4, 4}), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(1, {-1.0}, {4}), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(1, {0.0}, {4}), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(1, {1.0}, {1}), std::invalid_argument);
  CHECK_THROWS_AS(build_grid(2, {1.0}, {4}), std::invalid_argument);
}

TEST_CASE("assemble_operator: two-cell matrix by hand") {
  auto g = grid_1d(2);
  const double h = g->cell_volume;
  const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 1.0));
  const Eigen::MatrixXd dense(op.matrix);
  CHECK(dense(0, 0) == doctest::Approx(-1.0 / (h * h)));
  CHECK(dense(0, 1) == doctest::Approx(1.0 / (h * h)));
  CHECK(dense(1, 0) == doctest::Approx(1.0 / (h * h)));
  CHECK(dense(1, 1) == doctest::Approx(-1.0 / (h * h)));
}

TEST_CASE("assemble_operator: constants are in the kernel exactly") {
  auto g = grid_1d(17);
  const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 2.0));
  const Field c = Field::Constant(g->num_cells(), 3.7);
  const Field lc = op.apply(c);
  CHECK(lc.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assemble_operator: matrix is exactly symmetric") {
  auto g = std::make_shared<const SpatialGrid>(build_grid(2, {1.0, 2.0}, {4, 3}));
  Field a(g->num_cells());
  detail::SplitMix64 rng(99);
  for (int i = 0; i < a.size(); ++i) a(i) = 1.0 + detail::uniform01(rng);
  const DiscreteOperator op =
      assemble_operator(g, EllipticCoefficients::isotropic(*g, a, 1.0, 2.0));
  const Eigen::MatrixXd dense(op.matrix);
  CHECK((dense - dense.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("assemble_operator: eigenvalues of -L within the Gershgorin band") {
  auto g = grid_1d(16);
  const double dx = g->cell_volume;
  const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 1.0));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(-Eigen::MatrixXd(op.matrix));
  CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  CHECK(es.eigenvalues().maxCoeff() <= 4.0 / (dx * dx) + 1e-8);
}

TEST_CASE("assemble_operator: ellipticity probe rejects out-of-band tensors") {
  auto g = grid_1d(8);
  Field a = Field::Constant(8, 1.0);
  a(3) = 3.0;  // exceeds the declared upper bound
  CHECK_THROWS_AS(assemble_operator(g, EllipticCoefficients::isotropic(*g, a, 1.0, 2.0)),
                  std::invalid_argument);
  Field b = Field::Constant(8, 1.0);
  b(5) = 0.25;  // below the declared lower bound
  CHECK_THROWS_AS(assemble_operator(g, EllipticCoefficients::isotropic(*g, b, 0.5, 2.0)),
                  std::invalid_argument);
}

TEST_CASE("assemble_operator: 2D rejects off-diagonal tensors") {
  auto g = std::make_shared<const SpatialGrid>(build_grid(2, {1.0, 1.0}, {3, 3}));
  EllipticCoefficients c = EllipticCoefficients::constant(*g, 1.0);
  c.values(4, 1) = 0.2;
  c.values(4, 2) = 0.2;  // symmetric but not diagonal
  CHECK_THROWS_AS(assemble_operator(g, c), std::invalid_argument);
  c.values(4, 2) = 0.3;  // not even symmetric
  CHECK_THROWS_AS(assemble_operator(g, c), std::invalid_argument);
}

TEST_CASE("dirichlet_form: constants annihilate the form") {
  auto g = grid_1d(12);
  const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 1.0));
  const Field c = Field::Constant(12, -2.5);
  const Field v = random_field(12, 7);
  CHECK(dirichlet_form(op, c, v) == 0.0);
}

TEST_CASE("dirichlet_form: gradient energy of the identity profile") {
  // cell-centered samples of u(x) = x on [0,1]: the face form covers the
  // (N-1) interior faces only, giving exactly 1 - dx; first order in dx.
  for (int cells : {16, 32, 64}) {
    auto g = grid_1d(cells);
    const double dx = g->cell_volume;
    const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 1.0));
    Field u(cells);
    for (int i = 0; i < cells; ++i) u(i) = g->cell_center(i)[0];
    const double e = dirichlet_form(op, u, u);
    CHECK(e == doctest::Approx(1.0 - dx).epsilon(1e-12));
    CHECK(std::abs(e - 1.0) <= 1.5 * dx);
  }
}

TEST_CASE("dirichlet_form: symmetric in its arguments") {
  auto g = grid_1d(20);
  const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 1.3));
  const Field u = random_field(20, 1);
  const Field v = random_field(20, 2);
  CHECK(dirichlet_form(op, u, v) == dirichlet_form(op, v, u));
}

TEST_CASE("dirichlet_form: matches -u'Lv * volume") {
  auto g = grid_1d(10);
  const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 1.0));
  const Field u = random_field(10, 3);
  const Field v = random_field(10, 4);
  const double via_matrix = -u.dot(Eigen::MatrixXd(op.matrix) * v) * g->cell_volume;
  CHECK(dirichlet_form(op, u, v) == doctest::Approx(via_matrix).epsilon(1e-12));
}

TEST_CASE("coercivity sandwich against the unit-coefficient form") {
  auto g = grid_1d(24);
  const double lambda = 0.5, Lambda = 2.0;
  Field a(24);
  detail::SplitMix64 rng(11);
  for (int i = 0; i < 24; ++i) a(i) = lambda + (Lambda - lambda) * detail::uniform01(rng);
  const DiscreteOperator op =
      assemble_operator(g, EllipticCoefficients::isotropic(*g, a, lambda, Lambda));
  const DiscreteOperator unit = assemble_operator(g, EllipticCoefficients::constant(*g, 1.0));
  for (int trial = 0; trial < 10; ++trial) {
    const Field u = random_field(24, 100 + trial);
    const double e = op.energy(u);
    const double d = unit.energy(u);
    CHECK(e >= lambda * d - 1e-12 * std::abs(e));
    CHECK(e <= Lambda * d + 1e-12 * std::abs(e));
  }
}

TEST_CASE("boundary_integral: 1D endpoints") {
  auto g = grid_1d(8);
  const Field u = Field::Ones(8);
  const Field w = Field::Ones(2);
  CHECK(boundary_integral(*g, u, w) == 2.0);
  CHECK(boundary_integral(*g, Field::Zero(8), w) == 0.0);
  // closed form u(0)w(0) + u(1)w(1)
  const Field u2 = random_field(8, 5);
  const Field w2 = random_field(2, 6);
  CHECK(boundary_integral(*g, u2, w2) == doctest::Approx(u2(0) * w2(0) + u2(7) * w2(1)));
}

TEST_CASE("boundary_integral: 2D unit-square perimeter") {
  const SpatialGrid g = build_grid(2, {1.0, 1.0}, {3, 3});
  const Field u = Field::Ones(9);
  const Field w = Field::Ones(g.num_boundary());
  CHECK(boundary_integral(g, u, w) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK(g.perimeter() == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("boundary_integral: weight arity enforced") {
  auto g = grid_1d(8);
  CHECK_THROWS_AS(boundary_integral(*g, Field::Ones(8), Field::Ones(3)),
                  std::invalid_argument);
}

TEST_CASE("trace_norm_estimate: constant-field lower bound on [0,1]") {
  auto g = grid_1d(32);
  const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 1.0));
  // ||1||_{L2(boundary)} = sqrt(2), ||1||_{H1} = 1
  const double est = trace_norm_estimate(*g, op, 1);
  CHECK(est >= std::sqrt(2.0) - 1e-12);
  CHECK(std::isfinite(est));
}

TEST_CASE("trace_norm_estimate: monotone in the number of trials") {
  auto g = grid_1d(16);
  const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 1.0));
  double prev = 0.0;
  for (int trials : {1, 4, 16, 64}) {
    const double est = trace_norm_estimate(*g, op, trials);
    CHECK(est >= prev);
    CHECK(std::isfinite(est));
    prev = est;
  }
  CHECK_THROWS_AS(trace_norm_estimate(*g, op, 0), std::invalid_argument);
}

TEST_CASE("reconstruct_gradient: exact on affine profiles") {
  auto g = grid_1d(9);
  Field u(9);
  for (int i = 0; i < 9; ++i) u(i) = 2.0 * g->cell_center(i)[0] + 1.0;
  const Eigen::MatrixXd grad = reconstruct_gradient(*g, u);
  for (int i = 0; i < 9; ++i) CHECK(grad(i, 0) == doctest::Approx(2.0).epsilon(1e-12));

  const SpatialGrid g2 = build_grid(2, {1.0, 1.0}, {5, 4});
  Field v(g2.num_cells());
  for (int i = 0; i < g2.num_cells(); ++i) {
    const Point p = g2.cell_center(i);
    v(i) = 2.0 * p[0] + 3.0 * p[1];
  }
  const Eigen::MatrixXd grad2 = reconstruct_gradient(g2, v);
  for (int i = 0; i < g2.num_cells(); ++i) {
    CHECK(grad2(i, 0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(grad2(i, 1) == doctest::Approx(3.0).epsilon(1e-12));
  }
}

TEST_CASE("boundary_source: maps face data into cells by area over volume") {
  auto g = grid_1d(4);
  const DiscreteOperator op = assemble_operator(g, EllipticCoefficients::constant(*g, 1.0));
  std::vector<double> flux{2.0, 3.0};
  const Field b = op.boundary_source(flux);
  CHECK(b(0) == doctest::Approx(2.0 / g->cell_volume));
  CHECK(b(3) == doctest::Approx(3.0 / g->cell_volume));
  CHECK(b(1) == 0.0);
  CHECK_THROWS_AS(op.boundary_source({1.0}), std::invalid_argument);
}
