#include "ospde/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>

namespace ospde {

namespace {

using nlohmann::json;

void expect_object(const json& v, const std::string& block) {
  if (!v.is_object()) throw ConfigError(block, "expected an object");
}

void expect_keys(const json& obj, const std::set<std::string>& allowed,
                 const std::string& block) {
  expect_object(obj, block);
  for (const auto& item : obj.items())
    if (allowed.find(item.key()) == allowed.end())
      throw ConfigError(block, "unknown key '" + item.key() + "'");
}

double req_num(const json& obj, const char* key, const std::string& block) {
  if (!obj.contains(key)) throw ConfigError(block, std::string("missing '") + key + "'");
  if (!obj[key].is_number()) throw ConfigError(block, std::string("'") + key + "' must be a number");
  return obj[key].get<double>();
}

double opt_num(const json& obj, const char* key, double fallback, const std::string& block) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw ConfigError(block, std::string("'") + key + "' must be a number");
  return obj[key].get<double>();
}

long long opt_int(const json& obj, const char* key, long long fallback,
                  const std::string& block) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number_integer())
    throw ConfigError(block, std::string("'") + key + "' must be an integer");
  return obj[key].get<long long>();
}

bool opt_bool(const json& obj, const char* key, bool fallback, const std::string& block) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_boolean())
    throw ConfigError(block, std::string("'") + key + "' must be a boolean");
  return obj[key].get<bool>();
}

std::string req_name(const json& obj, const std::string& block) {
  if (!obj.contains("name") || !obj["name"].is_string())
    throw ConfigError(block, "a named builtin needs a string 'name'");
  return obj["name"].get<std::string>();
}

/// per-component weights for h: either "value" (replicated) or "values".
std::vector<double> h_weights(const json& obj, int count, const std::string& block) {
  std::vector<double> w(static_cast<std::size_t>(count), 0.0);
  if (obj.contains("values")) {
    if (!obj["values"].is_array() || static_cast<int>(obj["values"].size()) != count)
      throw ConfigError(block, "'values' must be an array of length J");
    for (int j = 0; j < count; ++j) w[static_cast<std::size_t>(j)] = obj["values"][static_cast<std::size_t>(j)].get<double>();
  } else {
    const double v = opt_num(obj, "value", 0.0, block);
    for (auto& x : w) x = v;
  }
  return w;
}

double l2(const std::vector<double>& w) {
  double s = 0.0;
  for (double v : w) s += v * v;
  return std::sqrt(s);
}

void validate_spatial_keys(const json& obj, const std::string& block, bool allow_rate);

}  // namespace

RunConfig parse_config(const nlohmann::json& doc) {
  expect_keys(doc, {"grid", "time", "noise", "coefficients", "obstacle", "solver", "checks",
                    "output"},
              "top-level");
  if (!doc.contains("grid")) throw ConfigError("grid", "missing block");
  if (!doc.contains("time")) throw ConfigError("time", "missing block");
  if (!doc.contains("coefficients")) throw ConfigError("coefficients", "missing block");

  RunConfig c;
  c.doc = doc;

  const json& grid = doc["grid"];
  expect_keys(grid, {"dimension", "extents", "cells", "diffusion", "lambda", "Lambda"}, "grid");
  c.dimension = static_cast<int>(opt_int(grid, "dimension", 1, "grid"));
  if (c.dimension != 1 && c.dimension != 2)
    throw ConfigError("grid", "dimension must be 1 or 2");
  if (!grid.contains("extents") || !grid["extents"].is_array())
    throw ConfigError("grid", "'extents' must be an array");
  if (!grid.contains("cells") || !grid["cells"].is_array())
    throw ConfigError("grid", "'cells' must be an array");
  for (const auto& e : grid["extents"]) c.extents.push_back(e.get<double>());
  for (const auto& e : grid["cells"]) c.cells.push_back(e.get<int>());
  if (static_cast<int>(c.extents.size()) != c.dimension ||
      static_cast<int>(c.cells.size()) != c.dimension)
    throw ConfigError("grid", "extents/cells arity must match dimension");
  for (double e : c.extents)
    if (!(e > 0.0)) throw ConfigError("grid", "extents must be positive");
  for (int n : c.cells)
    if (n < 2) throw ConfigError("grid", "need at least 2 cells per axis");
  c.diffusion = opt_num(grid, "diffusion", 1.0, "grid");
  if (!(c.diffusion > 0.0)) throw ConfigError("grid", "diffusion must be positive");
  c.lambda = opt_num(grid, "lambda", c.diffusion, "grid");
  c.lambda_upper = opt_num(grid, "Lambda", c.diffusion, "grid");
  if (!(c.lambda > 0.0) || c.lambda_upper < c.lambda)
    throw ConfigError("grid", "need 0 < lambda <= Lambda");
  if (c.diffusion < c.lambda || c.diffusion > c.lambda_upper)
    throw ConfigError("grid", "diffusion must lie in [lambda, Lambda]");

  const json& time = doc["time"];
  expect_keys(time, {"T", "dt"}, "time");
  c.horizon = req_num(time, "T", "time");
  c.dt = req_num(time, "dt", "time");
  if (!(c.dt > 0.0) || !(c.horizon > 0.0)) throw ConfigError("time", "T and dt must be positive");
  const double ratio = c.horizon / c.dt;
  if (std::abs(ratio - std::llround(ratio)) > 1e-12 * std::max(1.0, ratio))
    throw ConfigError("time", "T must be an integer multiple of dt");

  if (doc.contains("noise")) {
    const json& noise = doc["noise"];
    expect_keys(noise, {"J", "seeds", "seed_count", "base_seed"}, "noise");
    c.noise_truncation = static_cast<int>(opt_int(noise, "J", 0, "noise"));
    if (c.noise_truncation < 0) throw ConfigError("noise", "J must be nonnegative");
    const std::uint64_t base =
        static_cast<std::uint64_t>(opt_int(noise, "base_seed", 12345, "noise"));
    if (noise.contains("seeds")) {
      if (!noise["seeds"].is_array() || noise["seeds"].empty())
        throw ConfigError("noise", "'seeds' must be a nonempty array");
      for (const auto& s : noise["seeds"]) c.seeds.push_back(s.get<std::uint64_t>());
    } else {
      const long long count = opt_int(noise, "seed_count", 1, "noise");
      if (count < 1) throw ConfigError("noise", "seed_count must be >= 1");
      for (long long i = 0; i < count; ++i) c.seeds.push_back(base + static_cast<std::uint64_t>(i));
    }
  } else {
    c.seeds = {12345};
  }

  expect_keys(doc["coefficients"],
              {"f", "g", "h", "l", "xi", "constants"}, "coefficients");
  // full object validation (parameter names, types) before any computation
  build_coefficient_set(doc["coefficients"], c.dimension, c.noise_truncation, "coefficients");
  if (doc["coefficients"].contains("xi"))
    validate_spatial_keys(doc["coefficients"]["xi"], "coefficients.xi", false);

  if (doc.contains("obstacle")) {
    const json& ob = doc["obstacle"];
    expect_keys(ob, {"mode", "field", "offset", "s0", "coefficients"}, "obstacle");
    const std::string mode = ob.contains("mode") ? ob["mode"].get<std::string>() : "none";
    if (mode != "none" && mode != "direct" && mode != "driven")
      throw ConfigError("obstacle", "mode must be none, direct or driven");
    if (mode == "direct" && !ob.contains("field"))
      throw ConfigError("obstacle", "direct mode needs 'field'");
    if (mode == "direct") validate_spatial_keys(ob["field"], "obstacle.field", true);
    if (mode == "driven") {
      if (!ob.contains("s0") || !ob.contains("coefficients"))
        throw ConfigError("obstacle", "driven mode needs 's0' and 'coefficients'");
      if (opt_num(ob, "offset", 0.0, "obstacle") > 0.0)
        throw ConfigError("obstacle", "offset must be nonpositive");
      expect_keys(ob["coefficients"], {"f", "g", "h", "l"}, "obstacle.coefficients");
      build_coefficient_set(ob["coefficients"], c.dimension, c.noise_truncation,
                            "obstacle.coefficients");
      validate_spatial_keys(ob["s0"], "obstacle.s0", false);
    }
  }

  if (doc.contains("solver")) {
    const json& sv = doc["solver"];
    expect_keys(sv,
                {"n_schedule", "tol_picard", "tol_inner", "max_picard", "max_sweeps",
                 "safety_margin", "store_gradients"},
                "solver");
    if (sv.contains("n_schedule")) {
      if (!sv["n_schedule"].is_array() || sv["n_schedule"].empty())
        throw ConfigError("solver", "'n_schedule' must be a nonempty array");
      c.solver.n_schedule.clear();
      for (const auto& v : sv["n_schedule"]) c.solver.n_schedule.push_back(v.get<double>());
      for (std::size_t i = 0; i < c.solver.n_schedule.size(); ++i) {
        if (!(c.solver.n_schedule[i] > 0.0))
          throw ConfigError("solver", "penalty levels must be positive");
        if (i > 0 && !(c.solver.n_schedule[i] > c.solver.n_schedule[i - 1]))
          throw ConfigError("solver", "n_schedule must be increasing");
      }
    }
    c.solver.tol_picard = opt_num(sv, "tol_picard", c.solver.tol_picard, "solver");
    c.solver.tol_inner = opt_num(sv, "tol_inner", c.solver.tol_inner, "solver");
    c.solver.max_picard = static_cast<int>(opt_int(sv, "max_picard", c.solver.max_picard, "solver"));
    c.solver.max_sweeps = static_cast<int>(opt_int(sv, "max_sweeps", c.solver.max_sweeps, "solver"));
    c.solver.safety_margin = opt_num(sv, "safety_margin", c.solver.safety_margin, "solver");
    c.solver.store_gradients = opt_bool(sv, "store_gradients", false, "solver");
  }

  if (doc.contains("checks")) {
    if (!doc["checks"].is_array()) throw ConfigError("checks", "must be an array");
    const std::vector<std::string> check_names = builtin_check_names();
    const std::set<std::string> known(check_names.begin(), check_names.end());
    static const std::map<std::string, std::set<std::string>> allowed_params = {
        {"ito_identity", {"name", "phi", "seeds", "levels", "base_seed", "min_decreasing"}},
        {"apriori_estimate", {"name", "pairs", "base_seed", "stability_tol", "target"}},
        {"comparison",
         {"name", "scenario", "delta", "pairs", "base_seed", "tolerance", "obstacle"}},
        {"weak_form", {"name", "psi", "chi", "seeds", "levels", "base_seed"}},
        {"kappa_estimate", {"name", "paths", "base_seed", "stability_tol"}}};
    for (std::size_t i = 0; i < doc["checks"].size(); ++i) {
      const json& chk = doc["checks"][i];
      const std::string block = "checks[" + std::to_string(i) + "]";
      expect_object(chk, block);
      const std::string name = req_name(chk, block);
      if (known.find(name) == known.end())
        throw ConfigError(block, "unknown check '" + name + "'");
      expect_keys(chk, allowed_params.at(name), block);
    }
  }

  if (doc.contains("output")) {
    const json& out = doc["output"];
    expect_keys(out, {"dir", "write_trajectories", "write_ledger", "write_measure"}, "output");
    c.write_trajectories = opt_bool(out, "write_trajectories", true, "output");
    c.write_ledger = opt_bool(out, "write_ledger", false, "output");
    c.write_measure = opt_bool(out, "write_measure", true, "output");
  }
  return c;
}

RunConfig parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("top-level", "cannot open config file '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const json::parse_error& e) {
    throw ConfigError("top-level", std::string("JSON parse error: ") + e.what());
  }
  return parse_config(doc);
}

namespace {

ScalarCoeff build_scalar(const json& obj, bool* depends_yz, const std::string& block) {
  const std::string name = req_name(obj, block);
  if (name == "zero") {
    expect_keys(obj, {"name"}, block);
    *depends_yz = false;
    return [](const CoeffCtx&, double, const Point&, double, const Grad&) { return 0.0; };
  }
  if (name == "constant") {
    expect_keys(obj, {"name", "value"}, block);
    const double v = req_num(obj, "value", block);
    *depends_yz = false;
    return [v](const CoeffCtx&, double, const Point&, double, const Grad&) { return v; };
  }
  if (name == "linear") {
    expect_keys(obj, {"name", "c0", "cy", "cz"}, block);
    const double c0 = opt_num(obj, "c0", 0.0, block);
    const double cy = opt_num(obj, "cy", 0.0, block);
    const double cz = opt_num(obj, "cz", 0.0, block);
    *depends_yz = cy != 0.0 || cz != 0.0;
    return [c0, cy, cz](const CoeffCtx&, double, const Point&, double y, const Grad& z) {
      return c0 + cy * y + cz * z.sum();
    };
  }
  if (name == "sine") {
    expect_keys(obj, {"name", "amplitude"}, block);
    const double a = opt_num(obj, "amplitude", 1.0, block);
    *depends_yz = a != 0.0;
    return [a](const CoeffCtx&, double, const Point&, double y, const Grad&) {
      return a * std::sin(y);
    };
  }
  if (name == "clipped_linear") {
    expect_keys(obj, {"name", "slope", "bound"}, block);
    const double s = opt_num(obj, "slope", 1.0, block);
    const double b = opt_num(obj, "bound", 1.0, block);
    if (!(b > 0.0)) throw ConfigError(block, "bound must be positive");
    *depends_yz = s != 0.0;
    return [s, b](const CoeffCtx&, double, const Point&, double y, const Grad&) {
      return s * std::clamp(y, -b, b);
    };
  }
  throw ConfigError(block, "unknown coefficient '" + name + "'");
}

VectorCoeff build_vector(const json& obj, int dim, bool* depends_yz, bool* is_zero,
                         const std::string& block) {
  const std::string name = req_name(obj, block);
  *is_zero = false;
  if (name == "zero") {
    expect_keys(obj, {"name"}, block);
    *depends_yz = false;
    *is_zero = true;
    return [dim](const CoeffCtx&, double, const Point&, double, const Grad&, double* out) {
      for (int i = 0; i < dim; ++i) out[i] = 0.0;
    };
  }
  if (name == "constant") {
    expect_keys(obj, {"name", "value", "values"}, block);
    std::vector<double> vals(static_cast<std::size_t>(dim), opt_num(obj, "value", 0.0, block));
    if (obj.contains("values")) {
      if (!obj["values"].is_array() || static_cast<int>(obj["values"].size()) != dim)
        throw ConfigError(block, "'values' must have one entry per dimension");
      for (int i = 0; i < dim; ++i) vals[static_cast<std::size_t>(i)] = obj["values"][static_cast<std::size_t>(i)].get<double>();
    }
    *depends_yz = false;
    return [vals, dim](const CoeffCtx&, double, const Point&, double, const Grad&, double* out) {
      for (int i = 0; i < dim; ++i) out[i] = vals[static_cast<std::size_t>(i)];
    };
  }
  if (name == "linear") {
    expect_keys(obj, {"name", "cy", "cz"}, block);
    const double cy = opt_num(obj, "cy", 0.0, block);
    const double cz = opt_num(obj, "cz", 0.0, block);
    *depends_yz = cy != 0.0 || cz != 0.0;
    return [cy, cz, dim](const CoeffCtx&, double, const Point&, double y, const Grad& z,
                         double* out) {
      for (int i = 0; i < dim; ++i) out[i] = cy * y + cz * z[i];
    };
  }
  if (name == "sine") {
    expect_keys(obj, {"name", "amplitude"}, block);
    const double a = opt_num(obj, "amplitude", 1.0, block);
    *depends_yz = a != 0.0;
    return [a, dim](const CoeffCtx&, double, const Point&, double y, const Grad&, double* out) {
      for (int i = 0; i < dim; ++i) out[i] = a * std::sin(y);
    };
  }
  if (name == "clipped_linear") {
    expect_keys(obj, {"name", "slope", "bound"}, block);
    const double s = opt_num(obj, "slope", 1.0, block);
    const double b = opt_num(obj, "bound", 1.0, block);
    if (!(b > 0.0)) throw ConfigError(block, "bound must be positive");
    *depends_yz = s != 0.0;
    return [s, b, dim](const CoeffCtx&, double, const Point&, double y, const Grad&,
                       double* out) {
      for (int i = 0; i < dim; ++i) out[i] = s * std::clamp(y, -b, b);
    };
  }
  throw ConfigError(block, "unknown coefficient '" + name + "'");
}

NoiseCoeff build_noise(const json& obj, int count, bool* depends_yz, const std::string& block) {
  const std::string name = req_name(obj, block);
  if (name == "zero") {
    expect_keys(obj, {"name"}, block);
    *depends_yz = false;
    return [count](const CoeffCtx&, double, const Point&, double, const Grad&, double* out) {
      for (int j = 0; j < count; ++j) out[j] = 0.0;
    };
  }
  if (name == "constant") {
    expect_keys(obj, {"name", "value", "values"}, block);
    const auto w = h_weights(obj, count, block);
    *depends_yz = false;
    return [w, count](const CoeffCtx&, double, const Point&, double, const Grad&, double* out) {
      for (int j = 0; j < count; ++j) out[j] = w[static_cast<std::size_t>(j)];
    };
  }
  if (name == "linear") {
    expect_keys(obj, {"name", "value", "values", "argument"}, block);
    const auto w = h_weights(obj, count, block);
    const std::string arg = obj.contains("argument") ? obj["argument"].get<std::string>() : "y";
    if (arg != "y" && arg != "z") throw ConfigError(block, "argument must be 'y' or 'z'");
    const bool use_y = arg == "y";
    *depends_yz = l2(w) != 0.0;
    return [w, count, use_y](const CoeffCtx&, double, const Point&, double y, const Grad& z,
                             double* out) {
      const double v = use_y ? y : z.sum();
      for (int j = 0; j < count; ++j) out[j] = w[static_cast<std::size_t>(j)] * v;
    };
  }
  if (name == "sine") {
    expect_keys(obj, {"name", "value", "values"}, block);
    const auto w = h_weights(obj, count, block);
    *depends_yz = l2(w) != 0.0;
    return [w, count](const CoeffCtx&, double, const Point&, double y, const Grad&, double* out) {
      for (int j = 0; j < count; ++j) out[j] = w[static_cast<std::size_t>(j)] * std::sin(y);
    };
  }
  if (name == "clipped_linear") {
    expect_keys(obj, {"name", "value", "values", "bound"}, block);
    const auto w = h_weights(obj, count, block);
    const double b = opt_num(obj, "bound", 1.0, block);
    if (!(b > 0.0)) throw ConfigError(block, "bound must be positive");
    *depends_yz = l2(w) != 0.0;
    return [w, count, b](const CoeffCtx&, double, const Point&, double y, const Grad&,
                         double* out) {
      const double v = std::clamp(y, -b, b);
      for (int j = 0; j < count; ++j) out[j] = w[static_cast<std::size_t>(j)] * v;
    };
  }
  throw ConfigError(block, "unknown coefficient '" + name + "'");
}

BoundaryCoeff build_boundary(const json& obj, bool* depends_y, bool* is_zero,
                             const std::string& block) {
  const std::string name = req_name(obj, block);
  *is_zero = false;
  if (name == "zero") {
    expect_keys(obj, {"name"}, block);
    *depends_y = false;
    *is_zero = true;
    return [](const CoeffCtx&, double, const Point&, double) { return 0.0; };
  }
  if (name == "constant") {
    expect_keys(obj, {"name", "value"}, block);
    const double v = req_num(obj, "value", block);
    *depends_y = false;
    return [v](const CoeffCtx&, double, const Point&, double) { return v; };
  }
  if (name == "linear") {
    expect_keys(obj, {"name", "c0", "cy"}, block);
    const double c0 = opt_num(obj, "c0", 0.0, block);
    const double cy = opt_num(obj, "cy", 0.0, block);
    *depends_y = cy != 0.0;
    return [c0, cy](const CoeffCtx&, double, const Point&, double y) { return c0 + cy * y; };
  }
  if (name == "sine") {
    expect_keys(obj, {"name", "amplitude"}, block);
    const double a = opt_num(obj, "amplitude", 1.0, block);
    *depends_y = a != 0.0;
    return [a](const CoeffCtx&, double, const Point&, double y) { return a * std::sin(y); };
  }
  if (name == "clipped_linear") {
    expect_keys(obj, {"name", "slope", "bound"}, block);
    const double s = opt_num(obj, "slope", 1.0, block);
    const double b = opt_num(obj, "bound", 1.0, block);
    if (!(b > 0.0)) throw ConfigError(block, "bound must be positive");
    *depends_y = s != 0.0;
    return [s, b](const CoeffCtx&, double, const Point&, double y) {
      return s * std::clamp(y, -b, b);
    };
  }
  throw ConfigError(block, "unknown coefficient '" + name + "'");
}

std::function<double(const Point&)> build_spatial(const json& obj, const SpatialGrid& grid,
                                                  const std::string& block) {
  const std::string name = req_name(obj, block);
  const double lx = grid.extents[0];
  if (name == "zero") {
    return [](const Point&) { return 0.0; };
  }
  if (name == "constant") {
    const double v = req_num(obj, "value", block);
    return [v](const Point&) { return v; };
  }
  if (name == "bump") {
    const double center = opt_num(obj, "center", 0.5 * lx, block);
    const double width = opt_num(obj, "width", 0.1 * lx, block);
    const double amp = opt_num(obj, "amplitude", 1.0, block);
    if (!(width > 0.0)) throw ConfigError(block, "bump width must be positive");
    return [center, width, amp](const Point& p) {
      const double s = (p[0] - center) / width;
      return amp * std::exp(-s * s);
    };
  }
  if (name == "sine") {
    const double amp = opt_num(obj, "amplitude", 1.0, block);
    const double modes = opt_num(obj, "modes", 1.0, block);
    return [amp, modes, lx](const Point& p) { return amp * std::sin(modes * M_PI * p[0] / lx); };
  }
  if (name == "linear") {
    const double slope = opt_num(obj, "slope", 1.0, block);
    const double intercept = opt_num(obj, "intercept", 0.0, block);
    return [slope, intercept](const Point& p) { return intercept + slope * p[0]; };
  }
  throw ConfigError(block, "unknown field '" + name + "'");
}

void validate_spatial_keys(const json& obj, const std::string& block, bool allow_rate) {
  const std::string name = req_name(obj, block);
  std::set<std::string> allowed{"name"};
  if (name == "constant") allowed.insert("value");
  if (name == "bump") allowed.insert({"center", "width", "amplitude"});
  if (name == "sine") allowed.insert({"amplitude", "modes"});
  if (name == "linear") allowed.insert({"slope", "intercept"});
  if (allow_rate) allowed.insert("rate");
  expect_keys(obj, allowed, block);
}

}  // namespace

CoefficientSet build_coefficient_set(const nlohmann::json& block, int dimension,
                                     int noise_components, const std::string& where) {
  CoefficientSet set = CoefficientSet::zero(dimension, noise_components);
  if (block.contains("f"))
    set.f = build_scalar(block["f"], &set.f_depends_yz, where + ".f");
  if (block.contains("g")) {
    set.g = build_vector(block["g"], dimension, &set.g_depends_yz, &set.g_zero, where + ".g");
  }
  if (block.contains("h"))
    set.h = build_noise(block["h"], noise_components, &set.h_depends_yz, where + ".h");
  if (block.contains("l"))
    set.l = build_boundary(block["l"], &set.l_depends_y, &set.l_zero, where + ".l");

  if (block.contains("constants")) {
    const nlohmann::json& cst = block["constants"];
    expect_keys(cst, {"C", "alpha", "beta", "theta"}, where + ".constants");
    set.lip_C = opt_num(cst, "C", 0.0, where + ".constants");
    set.lip_alpha = opt_num(cst, "alpha", 0.0, where + ".constants");
    set.lip_beta = opt_num(cst, "beta", 0.0, where + ".constants");
    set.lip_theta = opt_num(cst, "theta", 0.0, where + ".constants");
    if (set.lip_C < 0.0 || set.lip_alpha < 0.0 || set.lip_beta < 0.0 || set.lip_theta < 0.0)
      throw ConfigError(where + ".constants", "Lipschitz constants must be nonnegative");
  }

  nlohmann::json sig;
  sig["g"] = block.contains("g") ? block["g"] : nlohmann::json{{"name", "zero"}};
  sig["h"] = block.contains("h") ? block["h"] : nlohmann::json{{"name", "zero"}};
  sig["J"] = noise_components;
  set.gh_signature = sig.dump();
  return set;
}

Field build_field(const nlohmann::json& block, const SpatialGrid& grid,
                  const std::string& where) {
  validate_spatial_keys(block, where, false);
  const auto fn = build_spatial(block, grid, where);
  Field f(grid.num_cells());
  for (int i = 0; i < grid.num_cells(); ++i) f(i) = fn(grid.cell_center(i));
  return f;
}

ObstacleField build_obstacle_field(const nlohmann::json& block, const SpatialGrid& grid,
                                   const std::string& where) {
  validate_spatial_keys(block, where, true);
  const auto fn = build_spatial(block, grid, where);
  const double rate = opt_num(block, "rate", 0.0, where);
  return [fn, rate](double t, const Point& x) { return fn(x) + rate * t; };
}

ProblemSpec build_spec(const RunConfig& config) {
  auto grid = std::make_shared<const SpatialGrid>(
      build_grid(config.dimension, config.extents, config.cells));
  EllipticCoefficients ec = EllipticCoefficients::constant(*grid, config.diffusion);
  ec.lambda_min = config.lambda;
  ec.lambda_max = config.lambda_upper;
  auto op = std::make_shared<const DiscreteOperator>(assemble_operator(grid, ec));

  ProblemSpec spec;
  spec.grid = grid;
  spec.op = op;
  spec.horizon = config.horizon;
  spec.dt = config.dt;
  spec.noise_truncation = config.noise_truncation;
  spec.lambda = config.lambda;
  spec.trace_norm = trace_norm_estimate(*grid, *op, 64);
  spec.solver = config.solver;

  const nlohmann::json& cf = config.doc["coefficients"];
  spec.coeffs = build_coefficient_set(cf, config.dimension, config.noise_truncation,
                                      "coefficients");
  spec.initial = cf.contains("xi") ? build_field(cf["xi"], *grid, "coefficients.xi")
                                   : Field::Zero(grid->num_cells());

  if (config.doc.contains("obstacle")) {
    const nlohmann::json& ob = config.doc["obstacle"];
    const std::string mode = ob.contains("mode") ? ob["mode"].get<std::string>() : "none";
    if (mode == "direct") {
      spec.obstacle.mode = ObstacleMode::direct;
      spec.obstacle.direct = build_obstacle_field(ob["field"], *grid, "obstacle.field");
    } else if (mode == "driven") {
      spec.obstacle.mode = ObstacleMode::driven;
      spec.obstacle.offset = opt_num(ob, "offset", 0.0, "obstacle");
      spec.obstacle.driver_initial = build_field(ob["s0"], *grid, "obstacle.s0");
      spec.obstacle.driver = std::make_shared<CoefficientSet>(build_coefficient_set(
          ob["coefficients"], config.dimension, config.noise_truncation,
          "obstacle.coefficients"));
    }
  }
  return spec;
}

std::vector<std::string> builtin_coefficient_names() {
  return {"zero", "constant", "linear", "sine", "clipped_linear"};
}

std::vector<std::string> builtin_check_names() {
  return {"ito_identity", "apriori_estimate", "comparison", "weak_form", "kappa_estimate"};
}

std::string config_hash(const nlohmann::json& doc) {
  const std::string dump = doc.dump();
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : dump) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace ospde
