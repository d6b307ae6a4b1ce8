#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ospde/rng.hpp"
#include "test_support.hpp"

using namespace ospde;
using namespace ospde::testsupport;

namespace {

CoefficientSet with_constants(double C, double alpha, double beta, double theta) {
  CoefficientSet c = CoefficientSet::zero(1, 1);
  c.lip_C = C;
  c.lip_alpha = alpha;
  c.lip_beta = beta;
  c.lip_theta = theta;
  return c;
}

}  // namespace

TEST_CASE("validate_contraction: margin arithmetic") {
  // 2*1 - (2*0.3 + 0.5^2 + 2*1^2*0.2) = 0.75
  const auto a = validate_contraction(with_constants(0.0, 0.3, 0.5, 0.2), 1.0, 1.0);
  CHECK(a.pass);
  CHECK(a.margin == doctest::Approx(0.75).epsilon(1e-14));

  const auto b = validate_contraction(with_constants(0.0, 1.0, 1.0, 0.0), 1.0, 1.0);
  CHECK(!b.pass);
  CHECK(b.margin == doctest::Approx(-1.0).epsilon(1e-14));

  const auto c = validate_contraction(with_constants(0.0, 0.0, 0.0, 0.0), 1.0, 1.0);
  CHECK(c.pass);
  CHECK(c.margin == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("validate_contraction: rejects negative inputs") {
  CHECK_THROWS_AS(validate_contraction(with_constants(0, -0.1, 0, 0), 1.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_contraction(with_constants(0, 0, 0, 0), 0.0, 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(validate_contraction(with_constants(0, 0, 0, 0), 1.0, -1.0),
                  std::invalid_argument);
}

TEST_CASE("validate_contraction: increasing a constant never rescues a failure") {
  detail::SplitMix64 rng(314);
  for (int trial = 0; trial < 200; ++trial) {
    const double alpha = 2.0 * detail::uniform01(rng);
    const double beta = 2.0 * detail::uniform01(rng);
    const double theta = detail::uniform01(rng);
    const double lambda = 0.25 + detail::uniform01(rng);
    const double tr = 2.0 * detail::uniform01(rng);
    const auto base = validate_contraction(with_constants(0, alpha, beta, theta), lambda, tr);
    const double bump = 0.5 * detail::uniform01(rng);
    const auto more_alpha =
        validate_contraction(with_constants(0, alpha + bump, beta, theta), lambda, tr);
    const auto more_beta =
        validate_contraction(with_constants(0, alpha, beta + bump, theta), lambda, tr);
    const auto more_theta =
        validate_contraction(with_constants(0, alpha, beta, theta + bump), lambda, tr);
    CHECK(more_alpha.margin <= base.margin);
    CHECK(more_beta.margin <= base.margin);
    CHECK(more_theta.margin <= base.margin);
    if (!base.pass) {
      CHECK(!more_alpha.pass);
      CHECK(!more_beta.pass);
      CHECK(!more_theta.pass);
    }
  }
}

TEST_CASE("probe_lipschitz: 1-Lipschitz sine is accepted") {
  CoefficientSet c = CoefficientSet::zero(1, 1);
  c.f = [](const CoeffCtx&, double, const Point&, double y, const Grad&) { return std::sin(y); };
  c.lip_C = 1.0;
  const LipschitzReport rep = probe_lipschitz(c, 2000, 17);
  CHECK(!rep.any_violation());
  CHECK(rep.find("f", "y")->observed <= 1.0 + 1e-9);
}

TEST_CASE("probe_lipschitz: slope-2 line against a declared constant of 1") {
  CoefficientSet c = CoefficientSet::zero(1, 1);
  c.f = [](const CoeffCtx&, double, const Point&, double y, const Grad&) { return 2.0 * y; };
  c.lip_C = 1.0;
  const LipschitzReport rep = probe_lipschitz(c, 500, 18);
  const auto* entry = rep.find("f", "y");
  REQUIRE(entry != nullptr);
  CHECK(entry->violated);
  CHECK(entry->ratio == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(rep.any_violation());
}

TEST_CASE("probe_lipschitz: constant g shows zero observed slope") {
  CoefficientSet c = CoefficientSet::zero(1, 1);
  c.g = constant_g(0.7, 1);
  const LipschitzReport rep = probe_lipschitz(c, 300, 19);
  CHECK(rep.find("g", "z")->observed == 0.0);
  CHECK(rep.find("g", "y")->observed == 0.0);
  CHECK(!rep.any_violation());
}

TEST_CASE("probe_lipschitz: closed-form library with exact declared constants") {
  CoefficientSet c = CoefficientSet::zero(1, 2);
  c.f = [](const CoeffCtx&, double, const Point&, double y, const Grad&) { return std::sin(y); };
  c.g = [](const CoeffCtx&, double, const Point&, double y, const Grad& z, double* out) {
    out[0] = 0.5 * y + 0.3 * z[0];
  };
  c.h = [](const CoeffCtx&, double, const Point&, double y, const Grad& z, double* out) {
    out[0] = 0.4 * z.sum();
    out[1] = 0.2 * y;
  };
  c.l = [](const CoeffCtx&, double, const Point&, double y) { return 0.2 * y; };
  c.lip_C = 1.0;
  c.lip_alpha = 0.3;
  c.lip_beta = 0.4;
  c.lip_theta = 0.2;
  const LipschitzReport rep = probe_lipschitz(c, 4000, 21);
  CHECK(!rep.any_violation());
  CHECK(rep.find("g", "z")->observed == doctest::Approx(0.3).epsilon(1e-6));
  CHECK(rep.find("h", "z")->observed == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(rep.find("l", "y")->observed == doctest::Approx(0.2).epsilon(1e-9));
}

TEST_CASE("validate_integrability: zero data has zero norms") {
  ProblemSpec spec = make_spec(8, 1.0, 0.25, 0);
  const IntegrabilityReport rep = validate_integrability(spec);
  CHECK(rep.pass);
  CHECK(rep.f0_sq == 0.0);
  CHECK(rep.g0_sq == 0.0);
  CHECK(rep.h0_sq == 0.0);
  CHECK(rep.l0_sq == 0.0);
  CHECK(rep.data_norm() == 0.0);
}

TEST_CASE("validate_integrability: unit forcing has unit mass") {
  ProblemSpec spec = make_spec(16, 1.0, 0.125, 0);
  spec.coeffs.f = constant_f(1.0);
  const IntegrabilityReport rep = validate_integrability(spec);
  CHECK(rep.pass);
  CHECK(rep.f0_sq == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("validate_integrability: integrable singularity stays finite on the lattice") {
  ProblemSpec spec = make_spec(4, 1.0, 1.0, 0);
  spec.coeffs.f = [](const CoeffCtx&, double, const Point& x, double, const Grad&) {
    return 1.0 / x[0];
  };
  const IntegrabilityReport rep = validate_integrability(spec);
  CHECK(rep.pass);
  // cell centers 1/8, 3/8, 5/8, 7/8: sum (1/x)^2 * dx * dt
  const double expected =
      0.25 * (64.0 + 64.0 / 9.0 + 64.0 / 25.0 + 64.0 / 49.0);
  CHECK(rep.f0_sq == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("validate_integrability: non-finite values are reported with a location") {
  ProblemSpec spec = make_spec(4, 1.0, 1.0, 0);
  const double bad_x = spec.grid->cell_center(1)[0];
  spec.coeffs.f = [bad_x](const CoeffCtx&, double, const Point& x, double, const Grad&) {
    return 1.0 / (x[0] - bad_x);
  };
  const IntegrabilityReport rep = validate_integrability(spec);
  CHECK(!rep.pass);
  CHECK(rep.failure.find("f0") != std::string::npos);
}

TEST_CASE("lattice validation enforces an integer step count") {
  ProblemSpec spec = make_spec(4, 1.0, 0.1, 0);
  CHECK_NOTHROW(spec.validate_lattice());
  CHECK(spec.steps() == 10);
  spec.dt = 0.3;
  CHECK_THROWS_AS(spec.validate_lattice(), std::invalid_argument);
  spec.dt = -0.1;
  CHECK_THROWS_AS(spec.validate_lattice(), std::invalid_argument);
}

TEST_CASE("require_contraction: gate honors the safety factor and force flag") {
  ProblemSpec spec = make_spec(4, 1.0, 0.1, 1);
  spec.coeffs.lip_beta = 1.5;  // margin = 2 - 2.25 < 0
  CHECK_THROWS_AS(require_contraction(spec), std::runtime_error);
  spec.solver.force = true;
  CHECK_NOTHROW(require_contraction(spec));
  spec.solver.force = false;
  spec.coeffs.lip_beta = 0.0;
  CHECK_NOTHROW(require_contraction(spec));
  // margins inside the safety band are still rejected
  spec.coeffs.lip_alpha = 0.999;  // margin = 0.002 < 0.05
  CHECK_THROWS_AS(require_contraction(spec), std::runtime_error);
}
