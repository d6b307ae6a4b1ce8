#include "ospde/io.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace ospde {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return std::string(buf);
}

std::string csv_trajectory(const SpatialGrid& grid, const FieldTrajectory& traj) {
  std::string out = "t";
  for (int i = 0; i < grid.num_cells(); ++i) out += ",node_" + std::to_string(i);
  out += "\n";
  for (int k = 0; k <= traj.steps(); ++k) {
    out += format_double(k * traj.dt);
    for (int i = 0; i < traj.cells(); ++i) out += "," + format_double(traj.values(k, i));
    out += "\n";
  }
  return out;
}

std::string csv_measure(const SpatialGrid& grid, const RegularMeasure& measure, double dt) {
  std::string out = "k,i,t,x,nu\n";
  for (int k = 0; k < measure.mass.rows(); ++k) {
    for (int i = 0; i < measure.mass.cols(); ++i) {
      const Point p = grid.cell_center(i);
      out += std::to_string(k) + "," + std::to_string(i) + "," + format_double(k * dt) + "," +
             format_double(p[0]) + "," + format_double(measure.mass(k, i)) + "\n";
    }
  }
  return out;
}

std::string csv_ledger(const std::vector<EnergyLedger>& rows, double dt) {
  std::string out =
      "k,t,phi_delta,dirichlet,f_term,g_term,l_term,martingale,quadratic,measure_term,residual\n";
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const auto& r = rows[k];
    out += std::to_string(k) + "," + format_double(static_cast<double>(k) * dt) + "," +
           format_double(r.phi_delta) + "," + format_double(r.dirichlet) + "," +
           format_double(r.f_term) + "," + format_double(r.g_term) + "," +
           format_double(r.l_term) + "," + format_double(r.martingale) + "," +
           format_double(r.quadratic) + "," + format_double(r.measure_term) + "," +
           format_double(r.residual()) + "\n";
  }
  return out;
}

std::string csv_check_table(const std::vector<CheckReport>& reports) {
  std::string out = "check,verdict,margin,tolerance\n";
  for (const auto& r : reports)
    out += r.name + "," + (r.pass ? "pass" : "fail") + "," + format_double(r.margin) + "," +
           format_double(r.tolerance) + "\n";
  return out;
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write file '" + path + "'");
  out << content;
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace ospde
