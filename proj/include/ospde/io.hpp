#pragma once

#include <string>
#include <vector>

#include "ospde/obstacle_solver.hpp"
#include "ospde/verify.hpp"

namespace ospde {

/// %.17g rendering (round-trippable doubles, byte-stable across reruns).
std::string format_double(double v);

std::string csv_trajectory(const SpatialGrid& grid, const FieldTrajectory& traj);
std::string csv_measure(const SpatialGrid& grid, const RegularMeasure& measure, double dt);
std::string csv_ledger(const std::vector<EnergyLedger>& rows, double dt);
std::string csv_check_table(const std::vector<CheckReport>& reports);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace ospde
