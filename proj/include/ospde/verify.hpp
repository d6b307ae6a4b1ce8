#pragma once

#include <json.hpp>

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ospde/obstacle_solver.hpp"

namespace ospde {

/// Outcome of one property check, fully reproducible from the stored seeds.
struct CheckReport {
  std::string name;
  bool pass = false;
  double margin = 0.0;     ///< measured quantity the verdict is based on
  double tolerance = 0.0;  ///< threshold applied to the margin
  std::string refine_parameter;
  std::vector<double> refine_values;
  std::vector<double> refine_measurements;
  int paths_used = 0;
  std::vector<std::uint64_t> seeds;
  nlohmann::json details;

  nlohmann::json to_json() const;
};

/// Phi family for the energy identity; `cubic` is registered but rejected
/// (unbounded derivatives).
struct PhiFunction {
  std::string name;
  std::function<double(double)> value;
  std::function<double(double)> d1;
  std::function<double(double)> d2;
};

PhiFunction phi_by_name(const std::string& name);

/// All terms of the discrete energy identity for one trajectory, assembled
/// either scheme-consistently (midpoint pairing, exact for quadratic Phi and
/// zero coefficients) or in left-endpoint form.
struct EnergyLedger {
  double phi_delta = 0.0;   ///< integral of Phi(u_T) - Phi(xi)
  double dirichlet = 0.0;
  double f_term = 0.0;
  double g_term = 0.0;      ///< minus the pairing of g with grad(Phi'(u))
  double l_term = 0.0;
  double martingale = 0.0;
  double quadratic = 0.0;   ///< Ito correction
  double measure_term = 0.0;

  double residual() const {
    return phi_delta + dirichlet -
           (f_term + g_term + l_term + martingale + quadratic + measure_term);
  }
};

EnergyLedger assemble_energy_ledger(const ProblemSpec& spec, const FieldTrajectory& traj,
                                    const SamplePath& path, const RegularMeasure* measure,
                                    const PhiFunction& phi, bool midpoint = true);

/// Per-step contributions to the ledger (row k covers (t_k, t_{k+1}]); the
/// aggregate above is their sum.
std::vector<EnergyLedger> energy_ledger_steps(const ProblemSpec& spec,
                                              const FieldTrajectory& traj,
                                              const SamplePath& path,
                                              const RegularMeasure* measure,
                                              const PhiFunction& phi, bool midpoint = true);

struct ItoCheckOptions {
  std::string phi = "square";
  int seeds = 20;
  int levels = 3;
  std::uint64_t base_seed = 7001;
  int min_decreasing = 18;  ///< seeds whose residual must shrink at every halving
  int threads = 1;
};

/// Energy-identity residuals across dt halvings (shared Brownian paths via
/// coarsening); for obstacle specs also runs the measure-term ablation.
CheckReport check_ito_identity(const ProblemSpec& spec, const ItoCheckOptions& opts = {});

struct AprioriCheckOptions {
  int pairs = 100;  ///< antithetic path pairs
  std::uint64_t base_seed = 1001;
  double stability_tol = 0.25;  ///< allowed relative drift of the ratio under halving
  int threads = 1;
};

/// Empirical constant of the energy a priori estimate: Monte Carlo
/// LHS / RHS ratio and its stability under dt halving.
CheckReport check_apriori_estimate(const ProblemSpec& spec, const AprioriCheckOptions& opts = {});

struct ComparisonCheckOptions {
  int pairs = 50;
  std::uint64_t base_seed = 9001;
  double tolerance = 1e-7;
  bool obstacle = false;  ///< compare penalized solves instead of linear ones
  int threads = 1;
};

/// Order preservation between two specs with shared (g, h) on shared noise:
/// max over paths/steps/nodes of (u1 - u2)^+. Validates the ordering
/// hypotheses structurally before running.
CheckReport check_comparison(const ProblemSpec& spec_low, const ProblemSpec& spec_high,
                             const ComparisonCheckOptions& opts = {});

/// Separable test function psi(t) * chi(x) with analytic derivatives.
struct TestFunction {
  std::string psi_name;
  std::string chi_name;
  std::function<double(double)> psi;
  std::function<double(double)> dpsi;
  std::function<double(const Point&)> chi;
  std::function<void(const Point&, double*)> grad_chi;
};

TestFunction make_test_function(const std::string& psi_name, const std::string& chi_name,
                                double horizon, const SpatialGrid& grid);

struct WeakFormOptions {
  std::string psi = "bump";
  std::string chi = "one";
  int seeds = 10;
  int levels = 3;
  std::uint64_t base_seed = 4001;
  int threads = 1;
};

/// Residual of the weak relation against an independent quadrature of the
/// test-function terms; decreasing under dt halving, and strictly hurt by
/// dropping the measure term on obstacle runs.
CheckReport check_weak_form(const ProblemSpec& spec, const WeakFormOptions& opts = {});

/// The weak-form residual for one already-solved run.
double weak_form_residual(const ProblemSpec& spec, const FieldTrajectory& traj,
                          const SamplePath& path, const RegularMeasure* measure,
                          const TestFunction& tf, bool include_measure = true);

struct KappaCheckOptions {
  int paths = 100;
  std::uint64_t base_seed = 11001;
  double stability_tol = 0.25;
  int threads = 1;
};

/// Energy bound of the reflected potential against the data norms, plus the
/// domination property kappa >= u up to the penalty leak.
CheckReport check_kappa_estimate(const ProblemSpec& spec, const KappaCheckOptions& opts = {});

/// Spec with the time step divided by `factor` (same horizon).
ProblemSpec refine_dt(const ProblemSpec& spec, int factor);

}  // namespace ospde
