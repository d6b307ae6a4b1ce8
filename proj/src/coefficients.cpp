#include "ospde/coefficients.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "ospde/rng.hpp"

namespace ospde {

CoefficientSet CoefficientSet::zero(int dimension, int noise_components) {
  CoefficientSet c;
  c.dimension = dimension;
  c.noise_components = noise_components;
  c.f = [](const CoeffCtx&, double, const Point&, double, const Grad&) { return 0.0; };
  c.g = [dimension](const CoeffCtx&, double, const Point&, double, const Grad&, double* out) {
    for (int i = 0; i < dimension; ++i) out[i] = 0.0;
  };
  c.h = [noise_components](const CoeffCtx&, double, const Point&, double, const Grad&,
                           double* out) {
    for (int j = 0; j < noise_components; ++j) out[j] = 0.0;
  };
  c.l = [](const CoeffCtx&, double, const Point&, double) { return 0.0; };
  c.g_zero = true;
  c.l_zero = true;
  c.gh_signature = "zero";
  return c;
}

void ProblemSpec::validate_lattice() const {
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
  const double ratio = horizon / dt;
  const double rounded = std::llround(ratio);
  if (std::abs(ratio - rounded) > 1e-12 * std::max(1.0, ratio))
    throw std::invalid_argument("horizon must be an integer multiple of dt");
  if (rounded < 1.0) throw std::invalid_argument("need at least one time step");
}

ContractionVerdict validate_contraction(const CoefficientSet& coeff, double lambda,
                                        double trace_norm) {
  if (!(lambda > 0.0)) throw std::invalid_argument("lambda must be positive");
  if (trace_norm < 0.0) throw std::invalid_argument("trace norm must be nonnegative");
  if (coeff.lip_C < 0.0 || coeff.lip_alpha < 0.0 || coeff.lip_beta < 0.0 ||
      coeff.lip_theta < 0.0)
    throw std::invalid_argument("declared Lipschitz constants must be nonnegative");

  ContractionVerdict v;
  v.margin = 2.0 * lambda - (2.0 * coeff.lip_alpha + coeff.lip_beta * coeff.lip_beta +
                             2.0 * trace_norm * trace_norm * coeff.lip_theta);
  v.pass = v.margin > 0.0;
  return v;
}

bool LipschitzReport::any_violation() const {
  for (const auto& e : entries)
    if (e.violated) return true;
  return false;
}

const LipschitzEntry* LipschitzReport::find(const std::string& name,
                                            const std::string& direction) const {
  for (const auto& e : entries)
    if (e.name == name && e.direction == direction) return &e;
  return nullptr;
}

namespace {

LipschitzEntry make_entry(const std::string& name, const std::string& direction,
                          double declared, double observed) {
  LipschitzEntry e;
  e.name = name;
  e.direction = direction;
  e.declared = declared;
  e.observed = observed;
  // small additive slack absorbs rounding in the difference quotients
  const double slack = 1e-9 * std::max(1.0, declared);
  e.violated = observed > declared + slack;
  if (declared > 0.0)
    e.ratio = observed / declared;
  else
    e.ratio = observed > slack ? std::numeric_limits<double>::infinity() : 1.0;
  return e;
}

}  // namespace

LipschitzReport probe_lipschitz(const CoefficientSet& coeff, int probes, std::uint64_t seed,
                                double horizon, const SpatialGrid* grid) {
  if (probes < 1) throw std::invalid_argument("need at least one probe");

  LipschitzReport rep;
  rep.probes = probes;
  rep.seed = seed;

  const int d = coeff.dimension;
  const int J = coeff.noise_components;
  detail::SplitMix64 rng(seed);
  CoeffCtx ctx;

  double f_y = 0.0, f_z = 0.0, g_y = 0.0, g_z = 0.0, h_y = 0.0, h_z = 0.0, l_y = 0.0;

  std::vector<double> ga(static_cast<std::size_t>(std::max(1, d)));
  std::vector<double> gb(static_cast<std::size_t>(std::max(1, d)));
  std::vector<double> ha(static_cast<std::size_t>(std::max(1, J)));
  std::vector<double> hb(static_cast<std::size_t>(std::max(1, J)));

  auto vec_dist = [](const std::vector<double>& a, const std::vector<double>& b, int m) {
    double s = 0.0;
    for (int i = 0; i < m; ++i) s += (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]) * (a[static_cast<std::size_t>(i)] - b[static_cast<std::size_t>(i)]);
    return std::sqrt(s);
  };

  for (int p = 0; p < probes; ++p) {
    const double t = horizon * detail::uniform01(rng);
    Point x;
    x.dim = d;
    if (grid != nullptr) {
      const int cell = static_cast<int>(detail::uniform01(rng) * grid->num_cells());
      x = grid->cell_center(std::min(cell, grid->num_cells() - 1));
    } else {
      for (int k = 0; k < d; ++k) x.coord[static_cast<std::size_t>(k)] = detail::uniform01(rng);
    }

    const double scale = (p % 4 == 0) ? 1e-3 : 3.0;  // mix small and order-one offsets
    const double y = 3.0 * (2.0 * detail::uniform01(rng) - 1.0);
    const double y2 = y + scale * (2.0 * detail::uniform01(rng) - 1.0);
    Grad z, z2;
    z.dim = d;
    z2.dim = d;
    for (int k = 0; k < d; ++k) {
      z.g[static_cast<std::size_t>(k)] = 3.0 * (2.0 * detail::uniform01(rng) - 1.0);
      z2.g[static_cast<std::size_t>(k)] =
          z.g[static_cast<std::size_t>(k)] + scale * (2.0 * detail::uniform01(rng) - 1.0);
    }
    const double dy = std::abs(y - y2);
    double dz = 0.0;
    for (int k = 0; k < d; ++k) {
      const double e = z.g[static_cast<std::size_t>(k)] - z2.g[static_cast<std::size_t>(k)];
      dz += e * e;
    }
    dz = std::sqrt(dz);

    // y-direction quotients (z held fixed)
    if (dy > 1e-14) {
      if (coeff.f) f_y = std::max(f_y, std::abs(coeff.f(ctx, t, x, y, z) - coeff.f(ctx, t, x, y2, z)) / dy);
      if (coeff.g) {
        coeff.g(ctx, t, x, y, z, ga.data());
        coeff.g(ctx, t, x, y2, z, gb.data());
        g_y = std::max(g_y, vec_dist(ga, gb, d) / dy);
      }
      if (coeff.h && J > 0) {
        coeff.h(ctx, t, x, y, z, ha.data());
        coeff.h(ctx, t, x, y2, z, hb.data());
        h_y = std::max(h_y, vec_dist(ha, hb, J) / dy);
      }
      if (coeff.l) l_y = std::max(l_y, std::abs(coeff.l(ctx, t, x, y) - coeff.l(ctx, t, x, y2)) / dy);
    }
    // z-direction quotients (y held fixed)
    if (dz > 1e-14) {
      if (coeff.f) f_z = std::max(f_z, std::abs(coeff.f(ctx, t, x, y, z) - coeff.f(ctx, t, x, y, z2)) / dz);
      if (coeff.g) {
        coeff.g(ctx, t, x, y, z, ga.data());
        coeff.g(ctx, t, x, y, z2, gb.data());
        g_z = std::max(g_z, vec_dist(ga, gb, d) / dz);
      }
      if (coeff.h && J > 0) {
        coeff.h(ctx, t, x, y, z, ha.data());
        coeff.h(ctx, t, x, y, z2, hb.data());
        h_z = std::max(h_z, vec_dist(ha, hb, J) / dz);
      }
    }
  }

  rep.entries.push_back(make_entry("f", "y", coeff.lip_C, f_y));
  rep.entries.push_back(make_entry("f", "z", coeff.lip_C, f_z));
  rep.entries.push_back(make_entry("g", "y", coeff.lip_C, g_y));
  rep.entries.push_back(make_entry("g", "z", coeff.lip_alpha, g_z));
  rep.entries.push_back(make_entry("h", "y", coeff.lip_C, h_y));
  rep.entries.push_back(make_entry("h", "z", coeff.lip_beta, h_z));
  rep.entries.push_back(make_entry("l", "y", coeff.lip_theta, l_y));
  return rep;
}

IntegrabilityReport validate_integrability(const ProblemSpec& spec) {
  IntegrabilityReport rep;
  spec.validate_lattice();
  const auto& grid = *spec.grid;
  const int n = grid.num_cells();
  const int d = grid.dimension;
  const int J = spec.coeffs.noise_components;
  const int K = spec.steps();
  const double dt = spec.dt;
  const double vol = grid.cell_volume;

  CoeffCtx ctx;
  Grad z0;
  z0.dim = d;
  std::vector<double> gv(static_cast<std::size_t>(std::max(1, d)));
  std::vector<double> hv(static_cast<std::size_t>(std::max(1, J)));

  auto fail_at = [&](const char* name, double t, int cell) {
    rep.pass = false;
    rep.failure = std::string(name) + " non-finite at t=" + std::to_string(t) +
                  ", cell=" + std::to_string(cell);
  };

  if (spec.initial.size() != n)
    throw std::invalid_argument("initial datum length does not match grid");
  for (int i = 0; i < n; ++i) {
    if (!std::isfinite(spec.initial(i))) {
      fail_at("xi", 0.0, i);
      return rep;
    }
    rep.xi_sq += spec.initial(i) * spec.initial(i) * vol;
  }

  for (int k = 0; k < K; ++k) {
    const double t = k * dt;
    for (int i = 0; i < n; ++i) {
      const Point x = grid.cell_center(i);
      const double fv = spec.coeffs.f(ctx, t, x, 0.0, z0);
      if (!std::isfinite(fv)) {
        fail_at("f0", t, i);
        return rep;
      }
      rep.f0_sq += fv * fv * vol * dt;
      spec.coeffs.g(ctx, t, x, 0.0, z0, gv.data());
      for (int c = 0; c < d; ++c) {
        if (!std::isfinite(gv[static_cast<std::size_t>(c)])) {
          fail_at("g0", t, i);
          return rep;
        }
        rep.g0_sq += gv[static_cast<std::size_t>(c)] * gv[static_cast<std::size_t>(c)] * vol * dt;
      }
      if (J > 0) {
        spec.coeffs.h(ctx, t, x, 0.0, z0, hv.data());
        for (int j = 0; j < J; ++j) {
          if (!std::isfinite(hv[static_cast<std::size_t>(j)])) {
            fail_at("h0", t, i);
            return rep;
          }
          rep.h0_sq += hv[static_cast<std::size_t>(j)] * hv[static_cast<std::size_t>(j)] * vol * dt;
        }
      }
    }
    for (const auto& bf : grid.boundary_faces) {
      const double lv = spec.coeffs.l(ctx, t, bf.center, 0.0);
      if (!std::isfinite(lv)) {
        fail_at("l0", t, bf.cell);
        return rep;
      }
      rep.l0_sq += lv * lv * bf.area * dt;
    }
  }
  rep.pass = true;
  return rep;
}

void require_contraction(const ProblemSpec& spec) {
  const auto verdict = validate_contraction(spec.coeffs, spec.lambda, spec.trace_norm);
  if (verdict.margin <= spec.solver.safety_margin && !spec.solver.force) {
    throw std::runtime_error(
        "contraction property margin " + std::to_string(verdict.margin) +
        " does not exceed the safety factor " + std::to_string(spec.solver.safety_margin) +
        " (2*alpha + beta^2 + 2*||Tr||^2*theta must stay below 2*lambda)");
  }
}

}  // namespace ospde
