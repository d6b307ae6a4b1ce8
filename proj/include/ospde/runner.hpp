#pragma once

#include <json.hpp>

#include <string>
#include <vector>

#include "ospde/config.hpp"

namespace ospde {

/// Exit statuses of the experiment harness.
enum class RunStatus : int { ok = 0, check_failed = 1, config_error = 2 };

struct RunResult {
  RunStatus status = RunStatus::ok;
  std::vector<std::string> files;  ///< paths written, relative to out_dir
  nlohmann::json summary;          ///< per-seed records and check verdicts
};

struct RunnerOptions {
  bool force = false;
  int threads = 1;
};

/// Executes the solves and checks requested by the configuration, writing
/// trajectory/measure CSVs, per-check JSON reports, an aggregate CSV and a
/// manifest listing every file with the config hash. Configuration and
/// validation failures return config_error with the message on the summary.
RunResult run(const nlohmann::json& config_doc, const std::string& out_dir,
              const RunnerOptions& opts = {});

/// Reruns the configuration once per parameter value (dt, n_max, J or cells)
/// on fixed seeds and aggregates per-value metrics into sweep.csv.
RunResult sweep(const nlohmann::json& config_doc, const std::string& parameter,
                const std::vector<double>& values, const std::string& out_dir,
                const RunnerOptions& opts = {});

}  // namespace ospde
