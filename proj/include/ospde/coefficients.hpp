#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ospde/grid.hpp"

namespace ospde {

/// Opaque per-path handle available to random coefficient functions. Built-in
/// coefficients ignore it; user extensions may hash it to realize
/// path-dependent randomness without touching the driving noise directly.
struct CoeffCtx {
  std::uint64_t path_seed = 0;
};

/// Gradient argument passed to coefficient functions (d components).
struct Grad {
  std::array<double, 2> g{0.0, 0.0};
  int dim = 1;

  double operator[](int i) const { return g[static_cast<std::size_t>(i)]; }
  double sum() const { return dim == 1 ? g[0] : g[0] + g[1]; }
  double norm() const {
    return dim == 1 ? std::abs(g[0]) : std::sqrt(g[0] * g[0] + g[1] * g[1]);
  }
};

using ScalarCoeff = std::function<double(const CoeffCtx&, double t, const Point& x, double y,
                                         const Grad& z)>;
using VectorCoeff = std::function<void(const CoeffCtx&, double t, const Point& x, double y,
                                       const Grad& z, double* out)>;  // d components
using NoiseCoeff = std::function<void(const CoeffCtx&, double t, const Point& x, double y,
                                      const Grad& z, double* out)>;  // J components
using BoundaryCoeff = std::function<double(const CoeffCtx&, double t, const Point& x, double y)>;

/// The nonlinear random coefficients (f, g, h, l) with their declared
/// Lipschitz structure. `h` produces `noise_components` values per call and
/// ||h||^2 always means the truncated sum over those components.
struct CoefficientSet {
  ScalarCoeff f;
  VectorCoeff g;
  NoiseCoeff h;
  BoundaryCoeff l;
  int dimension = 1;
  int noise_components = 0;

  double lip_C = 0.0;      ///< y/z constant of f, y constant of g and h
  double lip_alpha = 0.0;  ///< z constant of g
  double lip_beta = 0.0;   ///< z constant of h
  double lip_theta = 0.0;  ///< y constant of l

  bool f_depends_yz = false;
  bool g_depends_yz = false;
  bool h_depends_yz = false;
  bool l_depends_y = false;
  bool g_zero = false;  ///< g is identically zero (enables the mild oracle)
  bool l_zero = false;  ///< l is identically zero

  /// Identity of the (g, h) pair, used to check "same g, h" hypotheses of
  /// the comparison suites.
  std::string gh_signature;

  static CoefficientSet zero(int dimension, int noise_components);
};

/// How the lower obstacle is specified.
enum class ObstacleMode { none, direct, driven };

/// Time-space field for direct obstacles.
using ObstacleField = std::function<double(double t, const Point& x)>;

struct ObstacleSpec {
  ObstacleMode mode = ObstacleMode::none;
  ObstacleField direct;                      ///< direct mode: S(t, x)
  double offset = 0.0;                       ///< driven mode: S = S' + offset, offset <= 0
  Field driver_initial;                      ///< driven mode: S'(0)
  std::shared_ptr<CoefficientSet> driver;    ///< driven mode: (f', g', h', l')
};

struct SolverOptions {
  std::vector<double> n_schedule{10.0, 100.0, 1000.0, 10000.0};
  double tol_picard = 1e-8;
  double tol_inner = 1e-10;
  int max_picard = 100;
  int max_sweeps = 50;
  double safety_margin = 0.05;  ///< required contraction margin before obstacle solves
  bool force = false;           ///< run despite a failed contraction gate
  bool store_gradients = false;
};

/// Full problem description: operator, data, obstacle, and discretization.
struct ProblemSpec {
  std::shared_ptr<const SpatialGrid> grid;
  std::shared_ptr<const DiscreteOperator> op;
  CoefficientSet coeffs;
  Field initial;  ///< xi
  ObstacleSpec obstacle;
  double horizon = 1.0;  ///< T
  double dt = 1e-2;
  int noise_truncation = 0;  ///< J
  double lambda = 1.0;       ///< ellipticity lower bound of the operator
  double trace_norm = 0.0;   ///< cached ||Tr|| estimate for the contraction gate
  SolverOptions solver;

  int steps() const { return static_cast<int>(std::llround(horizon / dt)); }
  void validate_lattice() const;  ///< checks T/dt integral within 1e-12, dt > 0
};

/// Result of the contraction-property gate
///   margin = 2*lambda - (2*alpha + beta^2 + 2*||Tr||^2*theta),
/// pass iff margin > 0.
struct ContractionVerdict {
  bool pass = false;
  double margin = 0.0;
};

ContractionVerdict validate_contraction(const CoefficientSet& coeff, double lambda,
                                        double trace_norm);

/// One coefficient's entry in the Lipschitz probe report.
struct LipschitzEntry {
  std::string name;        ///< "f", "g", "h" or "l"
  std::string direction;   ///< "y" or "z"
  double declared = 0.0;
  double observed = 0.0;
  double ratio = 0.0;      ///< observed / declared (inf when declared == 0 < observed)
  bool violated = false;
};

struct LipschitzReport {
  std::vector<LipschitzEntry> entries;
  int probes = 0;
  std::uint64_t seed = 0;

  bool any_violation() const;
  const LipschitzEntry* find(const std::string& name, const std::string& direction) const;
};

/// Randomized probe of the declared Lipschitz constants. Violations are
/// report entries, never exceptions.
LipschitzReport probe_lipschitz(const CoefficientSet& coeff, int probes, std::uint64_t seed,
                                double horizon = 1.0,
                                const SpatialGrid* grid = nullptr);

/// Discrete norms of the zero-argument coefficients over the full lattice.
struct IntegrabilityReport {
  bool pass = false;
  double f0_sq = 0.0;  ///< integral of ||f(.,.,0,0)||^2 dt
  double g0_sq = 0.0;
  double h0_sq = 0.0;
  double l0_sq = 0.0;  ///< boundary norm
  double xi_sq = 0.0;
  std::string failure;  ///< location of the first non-finite value, if any

  double data_norm() const { return xi_sq + f0_sq + g0_sq + h0_sq + l0_sq; }
};

IntegrabilityReport validate_integrability(const ProblemSpec& spec);

/// Contraction margin gate used by the solvers; throws unless the margin
/// exceeds the safety factor or `force` is set.
void require_contraction(const ProblemSpec& spec);

}  // namespace ospde
