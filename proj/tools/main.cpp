#include <CLI11.hpp>

#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "ospde/config.hpp"
#include "ospde/runner.hpp"

namespace {

std::vector<double> parse_values(const std::string& csv) {
  std::vector<double> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stod(item));
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ospde: penalization simulator for obstacle problems of quasilinear "
               "stochastic PDEs with Neumann boundary conditions"};
  app.require_subcommand(0, 1);

  bool list_checks = false;
  bool list_coefficients = false;
  app.add_flag("--list-checks", list_checks, "list available property checks and exit");
  app.add_flag("--list-coefficients", list_coefficients,
               "list built-in coefficient names and exit");

  std::string config_path;
  std::string out_dir = "out";
  bool force = false;
  int threads = 1;

  CLI::App* run_cmd = app.add_subcommand("run", "run the solves and checks of a configuration");
  run_cmd->add_option("--config", config_path, "configuration JSON path")->required();
  run_cmd->add_option("--out", out_dir, "output directory (default: out)");
  run_cmd->add_flag("--force", force, "run even if the contraction gate fails");
  run_cmd->add_option("--threads", threads, "worker threads for path ensembles");

  std::string sweep_param;
  std::string sweep_values;
  CLI::App* sweep_cmd =
      app.add_subcommand("sweep", "rerun a configuration over a parameter range");
  sweep_cmd->add_option("--config", config_path, "configuration JSON path")->required();
  sweep_cmd->add_option("--out", out_dir, "output directory (default: out)");
  sweep_cmd->add_option("--param", sweep_param, "one of: dt, n_max, J, cells")->required();
  sweep_cmd->add_option("--values", sweep_values, "comma-separated parameter values")
      ->required();
  sweep_cmd->add_flag("--force", force, "run even if the contraction gate fails");
  sweep_cmd->add_option("--threads", threads, "worker threads for path ensembles");

  CLI11_PARSE(app, argc, argv);

  if (list_checks) {
    for (const auto& name : ospde::builtin_check_names()) std::cout << name << "\n";
    return 0;
  }
  if (list_coefficients) {
    for (const auto& name : ospde::builtin_coefficient_names()) std::cout << name << "\n";
    return 0;
  }
  if (app.get_subcommands().empty()) {
    std::cout << app.help();
    return 0;
  }

  nlohmann::json doc;
  try {
    doc = ospde::parse_config_file(config_path).doc;
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  }

  ospde::RunnerOptions opts;
  opts.force = force;
  opts.threads = threads;

  ospde::RunResult result;
  if (run_cmd->parsed()) {
    result = ospde::run(doc, out_dir, opts);
  } else {
    result = ospde::sweep(doc, sweep_param, parse_values(sweep_values), out_dir, opts);
  }
  return static_cast<int>(result.status);
}
