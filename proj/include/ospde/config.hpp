#pragma once

#include <json.hpp>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "ospde/coefficients.hpp"

namespace ospde {

/// Configuration error; the message names the offending block.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string block, const std::string& message)
      : std::runtime_error("[config:" + block + "] " + message), block_(std::move(block)) {}

  const std::string& block() const { return block_; }

 private:
  std::string block_;
};

/// Parsed and validated run configuration. Unknown keys anywhere in the
/// document are rejected.
struct RunConfig {
  nlohmann::json doc;

  int dimension = 1;
  std::vector<double> extents;
  std::vector<int> cells;
  double diffusion = 1.0;
  double lambda = 1.0;
  double lambda_upper = 1.0;

  double horizon = 1.0;
  double dt = 1e-2;

  int noise_truncation = 0;
  std::vector<std::uint64_t> seeds;

  SolverOptions solver;

  bool write_trajectories = true;
  bool write_ledger = false;
  bool write_measure = true;
};

RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_file(const std::string& path);

/// Builds the full problem (grid, operator, coefficients, obstacle, cached
/// trace-norm estimate) from a validated configuration.
ProblemSpec build_spec(const RunConfig& config);

/// Named coefficient builders (config surface). Scalar builtins: zero,
/// constant, linear, sine, clipped_linear.
CoefficientSet build_coefficient_set(const nlohmann::json& block, int dimension,
                                     int noise_components, const std::string& where);

/// Named nodal field builders: zero, constant, bump, sine, linear.
Field build_field(const nlohmann::json& block, const SpatialGrid& grid,
                  const std::string& where);

/// Time-space obstacle field (spatial builder plus optional linear rate).
ObstacleField build_obstacle_field(const nlohmann::json& block, const SpatialGrid& grid,
                                   const std::string& where);

std::vector<std::string> builtin_coefficient_names();
std::vector<std::string> builtin_check_names();

/// FNV-1a hash of the canonical (sorted-key) dump, as a hex string.
std::string config_hash(const nlohmann::json& doc);

}  // namespace ospde
