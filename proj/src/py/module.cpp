#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <json.hpp>

#include "ospde/config.hpp"
#include "ospde/io.hpp"
#include "ospde/runner.hpp"
#include "ospde/verify.hpp"

namespace py = pybind11;
using nlohmann::json;

namespace {

/// Grid plus assembled operator, the pair most operations need.
struct PyGrid {
  std::shared_ptr<const ospde::SpatialGrid> grid;
  std::shared_ptr<const ospde::DiscreteOperator> op;

  PyGrid(int dimension, const std::vector<double>& extents, const std::vector<int>& cells,
         double diffusion, double lambda, double lambda_upper) {
    grid = std::make_shared<const ospde::SpatialGrid>(
        ospde::build_grid(dimension, extents, cells));
    ospde::EllipticCoefficients ec = ospde::EllipticCoefficients::constant(*grid, diffusion);
    ec.lambda_min = lambda > 0.0 ? lambda : diffusion;
    ec.lambda_max = lambda_upper > 0.0 ? lambda_upper : diffusion;
    op = std::make_shared<const ospde::DiscreteOperator>(ospde::assemble_operator(grid, ec));
  }

  Eigen::MatrixXd cell_centers() const {
    Eigen::MatrixXd c(grid->num_cells(), grid->dimension);
    for (int i = 0; i < grid->num_cells(); ++i) {
      const ospde::Point p = grid->cell_center(i);
      for (int d = 0; d < grid->dimension; ++d) c(i, d) = p[d];
    }
    return c;
  }
};

/// Full problem built from a configuration document (JSON text).
struct PyProblem {
  ospde::RunConfig cfg;
  ospde::ProblemSpec spec;

  explicit PyProblem(const std::string& config_json) {
    cfg = ospde::parse_config(json::parse(config_json));
    spec = ospde::build_spec(cfg);
  }

  ospde::SamplePath path_for(std::uint64_t seed) const {
    return ospde::sample_path(seed, spec.noise_truncation, spec.dt, spec.steps());
  }

  Eigen::MatrixXd solve_seed(std::uint64_t seed) const {
    return ospde::solve(spec, path_for(seed)).values;
  }

  Eigen::MatrixXd mild_oracle_seed(std::uint64_t seed) const {
    return ospde::mild_oracle(spec, path_for(seed)).values;
  }

  py::dict solve_obstacle_seed(std::uint64_t seed) const {
    const ospde::ObstacleSolution sol = ospde::solve_obstacle(spec, path_for(seed));
    py::dict out;
    out["values"] = sol.trajectory.values;
    out["measure"] = sol.measure.mass;
    out["obstacle"] = sol.obstacle;
    out["total_mass"] = sol.measure.total();
    out["skorokhod_gap"] = ospde::skorokhod_gap(sol);
    out["picard_iterations"] = sol.picard_iterations;
    out["max_violation"] = sol.max_violation;
    out["penalty_level"] = sol.penalty_level;
    return out;
  }

  Eigen::MatrixXd reflected_potential_seed(std::uint64_t seed) const {
    const ospde::SamplePath path = path_for(seed);
    const ospde::FieldTrajectory u = ospde::solve(spec, path);
    const ospde::Field u0p = spec.initial.cwiseMax(0.0);
    return ospde::reflected_potential(spec, u, u0p, spec.solver.n_schedule).values;
  }

  double contraction_margin() const {
    return ospde::validate_contraction(spec.coeffs, spec.lambda, spec.trace_norm).margin;
  }

  std::string energy_ledger_seed(std::uint64_t seed) const {
    const ospde::SamplePath path = path_for(seed);
    const ospde::PhiFunction phi = ospde::phi_by_name("square");
    json out;
    if (spec.obstacle.mode != ospde::ObstacleMode::none) {
      const ospde::ObstacleSolution sol = ospde::solve_obstacle(spec, path);
      const ospde::EnergyLedger led =
          ospde::assemble_energy_ledger(spec, sol.trajectory, path, &sol.measure, phi);
      out["residual"] = led.residual();
      out["measure_term"] = led.measure_term;
    } else {
      const ospde::FieldTrajectory traj = ospde::solve(spec, path);
      const ospde::EnergyLedger led =
          ospde::assemble_energy_ledger(spec, traj, path, nullptr, phi);
      out["residual"] = led.residual();
      out["measure_term"] = 0.0;
    }
    return out.dump();
  }
};

std::string run_json(const std::string& config_json, const std::string& out_dir, bool force,
                     int threads) {
  ospde::RunnerOptions opts;
  opts.force = force;
  opts.threads = threads;
  const ospde::RunResult res = ospde::run(json::parse(config_json), out_dir, opts);
  json out;
  out["exit_code"] = static_cast<int>(res.status);
  out["files"] = res.files;
  out["summary"] = res.summary;
  return out.dump();
}

std::string sweep_json(const std::string& config_json, const std::string& parameter,
                       const std::vector<double>& values, const std::string& out_dir,
                       bool force, int threads) {
  ospde::RunnerOptions opts;
  opts.force = force;
  opts.threads = threads;
  const ospde::RunResult res =
      ospde::sweep(json::parse(config_json), parameter, values, out_dir, opts);
  json out;
  out["exit_code"] = static_cast<int>(res.status);
  out["files"] = res.files;
  out["summary"] = res.summary;
  return out.dump();
}

}  // namespace

PYBIND11_MODULE(_ospde, m) {
  m.doc() = "Penalization simulator for obstacle problems of quasilinear stochastic PDEs "
            "with Neumann boundary conditions";

  py::class_<PyGrid>(m, "Grid")
      .def(py::init<int, const std::vector<double>&, const std::vector<int>&, double, double,
                    double>(),
           py::arg("dimension"), py::arg("extents"), py::arg("cells"),
           py::arg("diffusion") = 1.0, py::arg("lambda_lower") = 0.0,
           py::arg("lambda_upper") = 0.0)
      .def_property_readonly("num_cells", [](const PyGrid& g) { return g.grid->num_cells(); })
      .def_property_readonly("cell_volume",
                             [](const PyGrid& g) { return g.grid->cell_volume; })
      .def_property_readonly("boundary_nodes",
                             [](const PyGrid& g) { return g.grid->boundary_nodes; })
      .def_property_readonly("boundary_weights",
                             [](const PyGrid& g) { return g.grid->boundary_weights; })
      .def("cell_centers", &PyGrid::cell_centers)
      .def("apply_operator",
           [](const PyGrid& g, const ospde::Field& u) { return g.op->apply(u); })
      .def("dirichlet_form",
           [](const PyGrid& g, const ospde::Field& u, const ospde::Field& v) {
             return ospde::dirichlet_form(*g.op, u, v);
           })
      .def("boundary_integral",
           [](const PyGrid& g, const ospde::Field& u, const ospde::Field& w) {
             return ospde::boundary_integral(*g.grid, u, w);
           })
      .def("trace_norm_estimate",
           [](const PyGrid& g, int trials, std::uint64_t seed) {
             return ospde::trace_norm_estimate(*g.grid, *g.op, trials, seed);
           },
           py::arg("trials") = 64, py::arg("seed") = 0x0359de5eedULL)
      .def("gradient", [](const PyGrid& g, const ospde::Field& u) {
        return ospde::reconstruct_gradient(*g.grid, u);
      });

  py::class_<ospde::SamplePath>(m, "SamplePath")
      .def_readonly("seed", &ospde::SamplePath::seed)
      .def_readonly("truncation", &ospde::SamplePath::truncation)
      .def_readonly("dt", &ospde::SamplePath::dt)
      .def_readonly("steps", &ospde::SamplePath::steps)
      .def_readonly("is_antithetic", &ospde::SamplePath::antithetic)
      .def_readonly("increments", &ospde::SamplePath::increments);

  m.def("sample_path", &ospde::sample_path, py::arg("seed"), py::arg("truncation"),
        py::arg("dt"), py::arg("steps"));
  m.def("antithetic", &ospde::antithetic);
  m.def("coarsen", &ospde::coarsen, py::arg("path"), py::arg("factor"));

  m.def("validate_contraction",
        [](double C, double alpha, double beta, double theta, double lambda,
           double trace_norm) {
          ospde::CoefficientSet cs = ospde::CoefficientSet::zero(1, 0);
          cs.lip_C = C;
          cs.lip_alpha = alpha;
          cs.lip_beta = beta;
          cs.lip_theta = theta;
          const auto v = ospde::validate_contraction(cs, lambda, trace_norm);
          return py::make_tuple(v.pass, v.margin);
        },
        py::arg("C"), py::arg("alpha"), py::arg("beta"), py::arg("theta"), py::arg("lam"),
        py::arg("trace_norm"));

  m.def("matrix_exponential", &ospde::matrix_exponential);

  py::class_<PyProblem>(m, "Problem")
      .def(py::init<const std::string&>(), py::arg("config_json"))
      .def_property_readonly("steps", [](const PyProblem& p) { return p.spec.steps(); })
      .def_property_readonly("dt", [](const PyProblem& p) { return p.spec.dt; })
      .def_property_readonly("trace_norm",
                             [](const PyProblem& p) { return p.spec.trace_norm; })
      .def("contraction_margin", &PyProblem::contraction_margin)
      .def("solve", &PyProblem::solve_seed, py::arg("seed"))
      .def("mild_oracle", &PyProblem::mild_oracle_seed, py::arg("seed"))
      .def("solve_obstacle", &PyProblem::solve_obstacle_seed, py::arg("seed"))
      .def("reflected_potential", &PyProblem::reflected_potential_seed, py::arg("seed"))
      .def("energy_ledger", &PyProblem::energy_ledger_seed, py::arg("seed"));

  m.def("run_json", &run_json, py::arg("config_json"), py::arg("out_dir"),
        py::arg("force") = false, py::arg("threads") = 1);
  m.def("sweep_json", &sweep_json, py::arg("config_json"), py::arg("parameter"),
        py::arg("values"), py::arg("out_dir"), py::arg("force") = false,
        py::arg("threads") = 1);
  m.def("builtin_check_names", &ospde::builtin_check_names);
  m.def("builtin_coefficient_names", &ospde::builtin_coefficient_names);
}
