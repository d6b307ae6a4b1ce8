#include "ospde/runner.hpp"

#include <cmath>
#include <filesystem>
#include <iostream>

#include "ospde/io.hpp"
#include "ospde/verify.hpp"

namespace ospde {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

double opt_num(const json& obj, const char* key, double fallback) {
  return obj.contains(key) ? obj[key].get<double>() : fallback;
}

int opt_int(const json& obj, const char* key, int fallback) {
  return obj.contains(key) ? obj[key].get<int>() : fallback;
}

std::string opt_str(const json& obj, const char* key, const std::string& fallback) {
  return obj.contains(key) ? obj[key].get<std::string>() : fallback;
}

double sup_energy_functional(const ProblemSpec& spec, const FieldTrajectory& traj) {
  double sup_sq = 0.0;
  double energy_int = 0.0;
  for (int k = 0; k <= traj.steps(); ++k) {
    const Field u = traj.at(k);
    sup_sq = std::max(sup_sq, spec.grid->norm_sq(u));
    if (k < traj.steps()) energy_int += spec.op->energy(u) * traj.dt;
  }
  return sup_sq + energy_int;
}

/// Shifts the ordered quantity of a comparison scenario by +delta.
ProblemSpec perturb_spec(const ProblemSpec& base, const std::string& scenario, double delta) {
  ProblemSpec hi = base;
  if (scenario == "ordered_xi") {
    hi.initial = base.initial.array() + delta;
  } else if (scenario == "ordered_f") {
    const ScalarCoeff f0 = base.coeffs.f;
    hi.coeffs.f = [f0, delta](const CoeffCtx& ctx, double t, const Point& x, double y,
                              const Grad& z) { return f0(ctx, t, x, y, z) + delta; };
  } else if (scenario == "ordered_l") {
    const BoundaryCoeff l0 = base.coeffs.l;
    hi.coeffs.l = [l0, delta](const CoeffCtx& ctx, double t, const Point& x, double y) {
      return l0(ctx, t, x, y) + delta;
    };
    hi.coeffs.l_zero = false;
  } else if (scenario == "ordered_obstacle") {
    hi.initial = base.initial.array() + delta;
    if (base.obstacle.mode == ObstacleMode::direct) {
      const ObstacleField s0 = base.obstacle.direct;
      hi.obstacle.direct = [s0, delta](double t, const Point& x) { return s0(t, x) + delta; };
    } else if (base.obstacle.mode == ObstacleMode::driven) {
      hi.obstacle.driver_initial = base.obstacle.driver_initial.array() + delta;
    } else {
      throw std::invalid_argument("scenario 'ordered_obstacle' needs an obstacle");
    }
  } else {
    throw std::invalid_argument("unknown comparison scenario '" + scenario + "'");
  }
  return hi;
}

CheckReport dispatch_check(const ProblemSpec& spec, const json& chk, int threads) {
  const std::string name = chk["name"].get<std::string>();
  if (name == "ito_identity") {
    ItoCheckOptions o;
    o.phi = opt_str(chk, "phi", o.phi);
    o.seeds = opt_int(chk, "seeds", o.seeds);
    o.levels = opt_int(chk, "levels", o.levels);
    o.base_seed = static_cast<std::uint64_t>(opt_int(chk, "base_seed", static_cast<int>(o.base_seed)));
    o.min_decreasing = opt_int(chk, "min_decreasing", std::max(o.seeds - 2, 1));
    o.threads = threads;
    return check_ito_identity(spec, o);
  }
  if (name == "apriori_estimate") {
    AprioriCheckOptions o;
    o.pairs = opt_int(chk, "pairs", o.pairs);
    o.base_seed = static_cast<std::uint64_t>(opt_int(chk, "base_seed", static_cast<int>(o.base_seed)));
    o.stability_tol = opt_num(chk, "stability_tol", o.stability_tol);
    o.threads = threads;
    const std::string target = opt_str(chk, "target", "solution");
    if (target == "obstacle_driver") {
      CheckReport rep = check_apriori_estimate(obstacle_driver_spec(spec), o);
      rep.name = "apriori_estimate_driver";
      return rep;
    }
    return check_apriori_estimate(spec, o);
  }
  if (name == "comparison") {
    ComparisonCheckOptions o;
    o.pairs = opt_int(chk, "pairs", o.pairs);
    o.base_seed = static_cast<std::uint64_t>(opt_int(chk, "base_seed", static_cast<int>(o.base_seed)));
    o.tolerance = opt_num(chk, "tolerance", o.tolerance);
    o.obstacle = chk.contains("obstacle") && chk["obstacle"].get<bool>();
    o.threads = threads;
    const std::string scenario = opt_str(chk, "scenario", "ordered_f");
    const double delta = opt_num(chk, "delta", scenario == "ordered_f" ? 1.0 : 0.1);
    const ProblemSpec high = perturb_spec(spec, scenario, delta);
    CheckReport rep = check_comparison(spec, high, o);
    rep.details["scenario"] = scenario;
    rep.details["delta"] = delta;
    return rep;
  }
  if (name == "weak_form") {
    WeakFormOptions o;
    o.psi = opt_str(chk, "psi", o.psi);
    o.chi = opt_str(chk, "chi", o.chi);
    o.seeds = opt_int(chk, "seeds", o.seeds);
    o.levels = opt_int(chk, "levels", o.levels);
    o.base_seed = static_cast<std::uint64_t>(opt_int(chk, "base_seed", static_cast<int>(o.base_seed)));
    o.threads = threads;
    return check_weak_form(spec, o);
  }
  if (name == "kappa_estimate") {
    KappaCheckOptions o;
    o.paths = opt_int(chk, "paths", o.paths);
    o.base_seed = static_cast<std::uint64_t>(opt_int(chk, "base_seed", static_cast<int>(o.base_seed)));
    o.stability_tol = opt_num(chk, "stability_tol", o.stability_tol);
    o.threads = threads;
    return check_kappa_estimate(spec, o);
  }
  throw std::invalid_argument("unknown check '" + name + "'");
}

}  // namespace

RunResult run(const nlohmann::json& config_doc, const std::string& out_dir,
              const RunnerOptions& opts) {
  RunResult result;
  RunConfig cfg;
  ProblemSpec spec;
  try {
    cfg = parse_config(config_doc);
    spec = build_spec(cfg);
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    result.status = RunStatus::config_error;
    result.summary["error"] = e.what();
    return result;
  }
  spec.solver.force = opts.force;

  const ContractionVerdict gate =
      validate_contraction(spec.coeffs, spec.lambda, spec.trace_norm);
  if (gate.margin <= spec.solver.safety_margin) {
    if (!opts.force) {
      const std::string msg =
          "the contraction property fails: margin " + std::to_string(gate.margin) +
          " does not exceed the safety factor " + std::to_string(spec.solver.safety_margin) +
          " (2*alpha + beta^2 + 2*||Tr||^2*theta vs 2*lambda); rerun with --force to override";
      std::cerr << "config error: " << msg << "\n";
      result.status = RunStatus::config_error;
      result.summary["error"] = msg;
      return result;
    }
    std::cerr << "WARNING: contraction property margin " << gate.margin
              << " is not above the safety factor; running under --force. "
              << "Picard iteration may diverge.\n";
  }

  const std::string hash = config_hash(config_doc);
  fs::create_directories(out_dir);
  auto emit = [&](const std::string& rel, const std::string& content) {
    write_text_file(out_dir + "/" + rel, content);
    result.files.push_back(rel);
  };

  result.summary["config_hash"] = hash;
  result.summary["contraction_margin"] = gate.margin;
  result.summary["trace_norm"] = spec.trace_norm;

  const bool with_obstacle = spec.obstacle.mode != ObstacleMode::none;
  const IntegrabilityReport data = validate_integrability(spec);
  if (!data.pass) {
    std::cerr << "config error: " << data.failure << "\n";
    result.status = RunStatus::config_error;
    result.summary["error"] = data.failure;
    return result;
  }
  result.summary["data_norm"] = data.data_norm();

  const PhiFunction phi_sq = phi_by_name("square");
  json seed_records = json::array();
  try {
    for (const std::uint64_t seed : cfg.seeds) {
      const SamplePath path =
          sample_path(seed, spec.noise_truncation, spec.dt, spec.steps());
      json rec;
      rec["seed"] = seed;
      if (with_obstacle) {
        const ObstacleSolution sol = solve_obstacle(spec, path);
        const double gap = skorokhod_gap(sol);
        const EnergyLedger ledger = assemble_energy_ledger(spec, sol.trajectory, path,
                                                           &sol.measure, phi_sq);
        rec["total_mass"] = sol.measure.total();
        rec["skorokhod_gap"] = gap;
        rec["picard_iterations"] = sol.picard_iterations;
        rec["max_violation"] = sol.max_violation;
        rec["penalty_level"] = sol.penalty_level;
        rec["ito_residual"] = ledger.residual();
        rec["energy_functional"] = sup_energy_functional(spec, sol.trajectory);
        if (cfg.write_trajectories)
          emit("trajectory_seed" + std::to_string(seed) + ".csv",
               csv_trajectory(*spec.grid, sol.trajectory));
        if (cfg.write_measure)
          emit("measure_seed" + std::to_string(seed) + ".csv",
               csv_measure(*spec.grid, sol.measure, spec.dt));
        if (cfg.write_ledger)
          emit("ledger_seed" + std::to_string(seed) + ".csv",
               csv_ledger(energy_ledger_steps(spec, sol.trajectory, path, &sol.measure, phi_sq),
                          spec.dt));
        json run_summary = {{"seed", seed},
                            {"total_mass", sol.measure.total()},
                            {"skorokhod_gap", gap},
                            {"picard_iterations", sol.picard_iterations},
                            {"picard_gap", sol.picard_gap},
                            {"max_violation", sol.max_violation},
                            {"penalty_level", sol.penalty_level},
                            {"contraction_margin", gate.margin}};
        emit("summary_seed" + std::to_string(seed) + ".json", run_summary.dump(2) + "\n");
      } else {
        const FieldTrajectory traj = solve(spec, path);
        const EnergyLedger ledger =
            assemble_energy_ledger(spec, traj, path, nullptr, phi_sq);
        rec["ito_residual"] = ledger.residual();
        rec["energy_functional"] = sup_energy_functional(spec, traj);
        if (cfg.write_trajectories)
          emit("trajectory_seed" + std::to_string(seed) + ".csv",
               csv_trajectory(*spec.grid, traj));
        if (cfg.write_ledger)
          emit("ledger_seed" + std::to_string(seed) + ".csv",
               csv_ledger(energy_ledger_steps(spec, traj, path, nullptr, phi_sq), spec.dt));
      }
      seed_records.push_back(rec);
    }
  } catch (const std::exception& e) {
    std::cerr << "solve failed: " << e.what() << "\n";
    result.status = RunStatus::check_failed;
    result.summary["error"] = e.what();
    return result;
  }
  result.summary["runs"] = seed_records;

  std::vector<CheckReport> reports;
  if (config_doc.contains("checks")) {
    for (const json& chk : config_doc["checks"]) {
      try {
        reports.push_back(dispatch_check(spec, chk, opts.threads));
      } catch (const std::exception& e) {
        std::cerr << "check '" << chk["name"].get<std::string>() << "' failed to run: "
                  << e.what() << "\n";
        CheckReport rep;
        rep.name = chk["name"].get<std::string>();
        rep.pass = false;
        rep.details = {{"error", e.what()}};
        reports.push_back(rep);
      }
    }
  }
  json check_summaries = json::array();
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& rep = reports[i];
    emit("check_" + rep.name + "_" + std::to_string(i) + ".json", rep.to_json().dump(2) + "\n");
    check_summaries.push_back({{"name", rep.name},
                               {"verdict", rep.pass ? "pass" : "fail"},
                               {"margin", rep.margin},
                               {"tolerance", rep.tolerance}});
    std::cout << (rep.pass ? "[PASS] " : "[FAIL] ") << rep.name << " margin=" << rep.margin
              << " tolerance=" << rep.tolerance << "\n";
  }
  result.summary["checks"] = check_summaries;
  if (!reports.empty()) emit("checks.csv", csv_check_table(reports));

  emit("run_summary.json", result.summary.dump(2) + "\n");

  json manifest;
  manifest["config_hash"] = hash;
  manifest["config"] = config_doc;
  manifest["files"] = result.files;
  write_text_file(out_dir + "/manifest.json", manifest.dump(2) + "\n");
  result.files.push_back("manifest.json");

  for (const auto& rep : reports)
    if (!rep.pass) result.status = RunStatus::check_failed;
  return result;
}

RunResult sweep(const nlohmann::json& config_doc, const std::string& parameter,
                const std::vector<double>& values, const std::string& out_dir,
                const RunnerOptions& opts) {
  RunResult result;
  if (parameter != "dt" && parameter != "n_max" && parameter != "J" && parameter != "cells") {
    std::cerr << "config error: sweep parameter must be one of dt, n_max, J, cells\n";
    result.status = RunStatus::config_error;
    return result;
  }
  if (values.empty()) {
    std::cerr << "config error: sweep needs at least one value\n";
    result.status = RunStatus::config_error;
    return result;
  }

  fs::create_directories(out_dir);
  std::string csv = "parameter,value,skorokhod_gap,total_mass,ito_residual,estimate_ratio\n";
  json rows = json::array();
  for (const double v : values) {
    json doc = config_doc;
    if (parameter == "dt") {
      doc["time"]["dt"] = v;
    } else if (parameter == "n_max") {
      doc["solver"]["n_schedule"] = json::array({v});
    } else if (parameter == "J") {
      doc["noise"]["J"] = static_cast<int>(v);
    } else {
      json cells = json::array();
      const int dim = doc["grid"].contains("dimension") ? doc["grid"]["dimension"].get<int>() : 1;
      for (int d = 0; d < dim; ++d) cells.push_back(static_cast<int>(v));
      doc["grid"]["cells"] = cells;
    }

    const std::string sub = parameter + "_" + format_double(v);
    const RunResult res = run(doc, out_dir + "/" + sub, opts);
    if (res.status == RunStatus::config_error) {
      result.status = RunStatus::config_error;
      return result;
    }
    if (res.status == RunStatus::check_failed) result.status = RunStatus::check_failed;

    double gap = 0.0, mass = 0.0, resid = 0.0, energy = 0.0;
    int count = 0;
    for (const auto& rec : res.summary["runs"]) {
      if (rec.contains("skorokhod_gap")) gap += rec["skorokhod_gap"].get<double>();
      if (rec.contains("total_mass")) mass += rec["total_mass"].get<double>();
      resid += std::abs(rec["ito_residual"].get<double>());
      energy += rec["energy_functional"].get<double>();
      ++count;
    }
    if (count > 0) {
      gap /= count;
      mass /= count;
      resid /= count;
      energy /= count;
    }
    const double data_norm = res.summary["data_norm"].get<double>();
    const double ratio = data_norm > 0.0 ? energy / data_norm : 0.0;
    csv += parameter + "," + format_double(v) + "," + format_double(gap) + "," +
           format_double(mass) + "," + format_double(resid) + "," + format_double(ratio) + "\n";
    rows.push_back({{"value", v},
                    {"dir", sub},
                    {"skorokhod_gap", gap},
                    {"total_mass", mass},
                    {"ito_residual", resid},
                    {"estimate_ratio", ratio}});
  }
  write_text_file(out_dir + "/sweep.csv", csv);
  result.files.push_back("sweep.csv");
  result.summary["parameter"] = parameter;
  result.summary["rows"] = rows;

  json manifest;
  manifest["config_hash"] = config_hash(config_doc);
  manifest["parameter"] = parameter;
  manifest["files"] = result.files;
  manifest["rows"] = rows;
  write_text_file(out_dir + "/sweep_manifest.json", manifest.dump(2) + "\n");
  result.files.push_back("sweep_manifest.json");
  return result;
}

}  // namespace ospde
