#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <cmath>

#include "ospde/linear_solver.hpp"
#include "test_support.hpp"

using namespace ospde;
using namespace ospde::testsupport;

namespace {

Field bump_field(const SpatialGrid& grid, double amp = 1.0) {
  Field f(grid.num_cells());
  for (int i = 0; i < grid.num_cells(); ++i) {
    const double s = (grid.cell_center(i)[0] - 0.5) / 0.15;
    f(i) = amp * std::exp(-s * s);
  }
  return f;
}

}  // namespace

TEST_CASE("solve: constant state is a fixed point of the unforced flow") {
  ProblemSpec spec = make_spec(16, 0.5, 0.01, 0);
  spec.initial = Field::Constant(16, 4.2);
  const SamplePath path = sample_path(1, 0, spec.dt, spec.steps());
  const FieldTrajectory traj = solve(spec, path);
  for (int k = 0; k <= traj.steps(); ++k)
    CHECK((traj.at(k).array() - 4.2).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("solve: constant boundary flux pumps mass at rate l * |boundary|") {
  ProblemSpec spec = make_spec(32, 1.0, 0.01, 0);
  const double c = 0.7;
  spec.coeffs.l = constant_l(c);
  spec.coeffs.l_zero = false;
  const SamplePath path = sample_path(2, 0, spec.dt, spec.steps());
  const FieldTrajectory traj = solve(spec, path);
  const double vol = spec.grid->cell_volume;
  const double mass0 = traj.at(0).sum() * vol;
  const double mass_end = traj.at(traj.steps()).sum() * vol;
  // d/dt (mass) = c * |boundary| = 2c in 1D
  CHECK(mass_end - mass0 == doctest::Approx(2.0 * c * spec.horizon).epsilon(1e-10));
}

TEST_CASE("solve: unit forcing from zero gives the linear-in-time constant state") {
  ProblemSpec spec = make_spec(8, 1.0, 0.05, 0);
  spec.coeffs.f = constant_f(1.0);
  const SamplePath path = sample_path(3, 0, spec.dt, spec.steps());
  const FieldTrajectory traj = solve(spec, path);
  for (int k = 0; k <= traj.steps(); ++k)
    CHECK((traj.at(k).array() - k * spec.dt).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("solve: zero-noise coefficients reproduce the deterministic mode bit for bit") {
  ProblemSpec det = make_spec(12, 0.5, 0.025, 0);
  det.initial = bump_field(*det.grid);
  det.coeffs.f = constant_f(0.3);

  ProblemSpec with_noise_slots = make_spec(12, 0.5, 0.025, 2);
  with_noise_slots.initial = det.initial;
  with_noise_slots.coeffs.f = constant_f(0.3);

  const FieldTrajectory a = solve(det, sample_path(5, 0, det.dt, det.steps()));
  const FieldTrajectory b =
      solve(with_noise_slots, sample_path(5, 2, det.dt, det.steps()));
  CHECK(a.values == b.values);
}

TEST_CASE("solve: mass is conserved without sources") {
  ProblemSpec spec = make_spec(32, 1.0, 0.02, 0);
  spec.initial = bump_field(*spec.grid);
  const SamplePath path = sample_path(6, 0, spec.dt, spec.steps());
  const FieldTrajectory traj = solve(spec, path);
  const double vol = spec.grid->cell_volume;
  CHECK(traj.at(traj.steps()).sum() * vol ==
        doctest::Approx(spec.initial.sum() * vol).epsilon(1e-10));
}

TEST_CASE("solve: Monte Carlo mean of additive noise matches the deterministic run") {
  const int cells = 8;
  const int paths = 10000;
  ProblemSpec spec = make_spec(cells, 0.25, 0.005, 2);
  spec.initial = bump_field(*spec.grid);
  spec.coeffs.h = constant_h({0.2, 0.1});

  ProblemSpec det = make_spec(cells, 0.25, 0.005, 0);
  det.initial = spec.initial;
  const Field reference =
      solve(det, sample_path(1, 0, det.dt, det.steps())).at(det.steps());

  Field mean = Field::Zero(cells);
  Field second = Field::Zero(cells);
  for (int p = 0; p < paths; ++p) {
    const SamplePath path = sample_path(1000 + p, 2, spec.dt, spec.steps());
    const Field u = solve(spec, path).at(spec.steps());
    mean += u;
    second += u.cwiseProduct(u);
  }
  mean /= paths;
  second /= paths;
  for (int i = 0; i < cells; ++i) {
    const double stderr_i = std::sqrt(std::max(second(i) - mean(i) * mean(i), 0.0) / paths);
    CHECK(std::abs(mean(i) - reference(i)) <= 4.0 * stderr_i + 1e-12);
  }
}

TEST_CASE("solve: unforced decay is a contraction in the L2 norm") {
  ProblemSpec spec = make_spec(24, 0.2, 0.01, 0);
  spec.initial = bump_field(*spec.grid, 2.0);
  const FieldTrajectory traj = solve(spec, sample_path(8, 0, spec.dt, spec.steps()));
  for (int k = 0; k < traj.steps(); ++k)
    CHECK(spec.grid->norm_sq(traj.at(k + 1)) <= spec.grid->norm_sq(traj.at(k)) + 1e-14);
}

TEST_CASE("step: rejects non-finite state and inconsistent paths") {
  ProblemSpec spec = make_spec(8, 0.1, 0.01, 0);
  const SamplePath path = sample_path(9, 0, spec.dt, spec.steps());
  Field u = Field::Zero(8);
  CHECK_NOTHROW(step(u, spec, path, 0));
  u(3) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(step(u, spec, path, 0), std::invalid_argument);
  const SamplePath wrong = sample_path(9, 0, spec.dt, spec.steps() + 1);
  CHECK_THROWS_AS(step(Field::Zero(8), spec, wrong, 0), std::invalid_argument);
}

TEST_CASE("solve: contraction gate blocks declared-violent coefficients") {
  ProblemSpec spec = make_spec(8, 0.1, 0.01, 1);
  spec.coeffs.lip_beta = 1.5;  // 2*lambda - beta^2 = -0.25
  const SamplePath path = sample_path(10, 1, spec.dt, spec.steps());
  CHECK_THROWS_AS(solve(spec, path), std::runtime_error);
  spec.solver.force = true;
  CHECK_NOTHROW(solve(spec, path));
}

TEST_CASE("matrix_exponential: agrees with the spectral form on symmetric matrices") {
  Eigen::MatrixXd a(3, 3);
  a << -2.0, 1.0, 0.0, 1.0, -2.0, 1.0, 0.0, 1.0, -2.0;
  const Eigen::MatrixXd pade = matrix_exponential(a);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a);
  const Eigen::MatrixXd spectral = es.eigenvectors() *
                                   es.eigenvalues().array().exp().matrix().asDiagonal() *
                                   es.eigenvectors().transpose();
  CHECK((pade - spectral).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK((matrix_exponential(Eigen::MatrixXd::Zero(4, 4)) -
         Eigen::MatrixXd::Identity(4, 4))
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
}

TEST_CASE("mild_oracle: pure semigroup action matches the spectral propagator") {
  ProblemSpec spec = make_spec(16, 0.5, 0.025, 0);
  spec.initial = bump_field(*spec.grid);
  const SamplePath path = sample_path(11, 0, spec.dt, spec.steps());
  const FieldTrajectory mild = mild_oracle(spec, path);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(spec.op->matrix));
  const Eigen::MatrixXd prop = es.eigenvectors() *
                               (spec.horizon * es.eigenvalues()).array().exp().matrix().asDiagonal() *
                               es.eigenvectors().transpose();
  const Field expected = prop * spec.initial;
  CHECK((mild.at(mild.steps()) - expected).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("mild_oracle: unit forcing accumulates linearly on constants") {
  ProblemSpec spec = make_spec(16, 1.0, 0.05, 0);
  spec.coeffs.f = constant_f(1.0);
  spec.coeffs.f_depends_yz = false;
  const SamplePath path = sample_path(12, 0, spec.dt, spec.steps());
  const FieldTrajectory mild = mild_oracle(spec, path);
  CHECK((mild.at(mild.steps()).array() - 1.0).abs().maxCoeff() <= 1e-10);
}

TEST_CASE("mild_oracle: rejects non-additive coefficients and oversized grids") {
  ProblemSpec spec = make_spec(16, 0.1, 0.01, 0);
  spec.coeffs.f_depends_yz = true;
  const SamplePath path = sample_path(13, 0, spec.dt, spec.steps());
  CHECK_THROWS_AS(mild_oracle(spec, path), std::invalid_argument);
  spec.coeffs.f_depends_yz = false;
  spec.coeffs.g_zero = false;
  CHECK_THROWS_AS(mild_oracle(spec, path), std::invalid_argument);
  spec.coeffs.g_zero = true;

  ProblemSpec big = make_spec(256, 0.1, 0.01, 0);
  const SamplePath big_path = sample_path(13, 0, big.dt, big.steps());
  CHECK_THROWS_AS(mild_oracle(big, big_path), std::invalid_argument);
}

TEST_CASE("mild_oracle vs stepper: first-order gap that halves with dt") {
  const int cells = 16;
  const int levels = 3;
  std::vector<double> gaps(levels, 0.0);
  for (int s = 0; s < 10; ++s) {
    ProblemSpec base = make_spec(cells, 0.5, 1e-2, 2);
    base.initial = bump_field(*base.grid);
    base.coeffs.f = constant_f(0.5);
    base.coeffs.h = constant_h({0.25, 0.15});
    const SamplePath fine = sample_path(100 + s, 2, base.dt / 4, base.steps() * 4);
    for (int l = 0; l < levels; ++l) {
      ProblemSpec spec = base;
      spec.dt = base.dt / (1 << l);
      const SamplePath path = coarsen(fine, 4 / (1 << l));
      const FieldTrajectory numeric = solve(spec, path);
      const FieldTrajectory mild = mild_oracle(spec, path);
      gaps[static_cast<std::size_t>(l)] +=
          (numeric.values - mild.values).cwiseAbs().maxCoeff();
    }
  }
  // averaged over seeds the gap is first order in dt
  CHECK(gaps[1] / gaps[0] == doctest::Approx(0.5).epsilon(0.4));
  CHECK(gaps[2] / gaps[1] == doctest::Approx(0.5).epsilon(0.4));
}

TEST_CASE("solve_spde_pair: identical specs produce identical trajectories") {
  ProblemSpec spec = make_spec(8, 0.2, 0.01, 2);
  spec.initial = bump_field(*spec.grid);
  spec.coeffs.h = constant_h({0.3, 0.2});
  spec.coeffs.gh_signature = "shared";
  const SamplePath path = sample_path(14, 2, spec.dt, spec.steps());
  const auto [a, b] = solve_spde_pair(spec, spec, path);
  CHECK(a.values == b.values);
}

TEST_CASE("solve_spde_pair: ordered data keeps trajectories ordered") {
  ProblemSpec lo = make_spec(12, 0.3, 0.01, 2);
  lo.initial = bump_field(*lo.grid);
  lo.coeffs.h = constant_h({0.3, 0.1});
  lo.coeffs.gh_signature = "shared";
  const SamplePath path = sample_path(15, 2, lo.dt, lo.steps());

  SUBCASE("shifted initial datum") {
    ProblemSpec hi = lo;
    hi.initial = lo.initial.array() + 1.0;
    const auto [a, b] = solve_spde_pair(lo, hi, path);
    CHECK((a.values - b.values).maxCoeff() <= 1e-12);
  }
  SUBCASE("shifted forcing") {
    ProblemSpec hi = lo;
    hi.coeffs.f = constant_f(1.0);
    const auto [a, b] = solve_spde_pair(lo, hi, path);
    CHECK((a.values - b.values).maxCoeff() <= 1e-12);
  }
}

TEST_CASE("solve_spde_pair: rejects mismatched shared structure") {
  ProblemSpec a = make_spec(8, 0.2, 0.01, 1);
  ProblemSpec b = make_spec(8, 0.2, 0.01, 1);
  a.coeffs.gh_signature = "one";
  b.coeffs.gh_signature = "two";
  const SamplePath path = sample_path(16, 1, a.dt, a.steps());
  CHECK_THROWS_AS(solve_spde_pair(a, b, path), std::invalid_argument);
  b.coeffs.gh_signature = "one";
  CHECK_THROWS_AS(solve_spde_pair(a, b, path), std::invalid_argument);  // distinct grids
}
