#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "siproj/analysis.hpp"
#include "siproj/harness/config.hpp"

namespace siproj::harness {

inline constexpr const char* kTrajectoryHeader =
    "step,weight_norm,effective_step,cosine_wg,objective,projected,raw_update_norm,applied_update_norm";

/// %.17g: enough digits for every double to parse back to itself.
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_trajectory_csv(const std::vector<TrajectoryRecord>& records, std::ostream& out) {
  out << kTrajectoryHeader << '\n';
  for (const auto& r : records) {
    out << r.step << ',' << format_double(r.weight_norm) << ',' << format_double(r.effective_step) << ','
        << format_double(r.cosine_wg) << ',' << format_double(r.objective) << ',' << (r.projected ? 1 : 0) << ','
        << format_double(r.raw_update_norm) << ',' << format_double(r.applied_update_norm) << '\n';
  }
}

inline void write_trajectory_csv(const std::vector<TrajectoryRecord>& records, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  write_trajectory_csv(records, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

/// Parses the CSV columns back into records; the certification-only fields
/// are left at their defaults.
inline std::vector<TrajectoryRecord> read_trajectory_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTrajectoryHeader) throw IoError("trajectory CSV: bad header");
  std::vector<TrajectoryRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::vector<std::string> cells;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 8) throw IoError("trajectory CSV: expected 8 columns, got " + std::to_string(cells.size()));
    TrajectoryRecord r;
    r.step = std::stoull(cells[0]);
    r.weight_norm = std::strtod(cells[1].c_str(), nullptr);
    r.effective_step = std::strtod(cells[2].c_str(), nullptr);
    r.cosine_wg = std::strtod(cells[3].c_str(), nullptr);
    r.objective = std::strtod(cells[4].c_str(), nullptr);
    r.projected = cells[5] == "1";
    r.raw_update_norm = std::strtod(cells[6].c_str(), nullptr);
    r.applied_update_norm = std::strtod(cells[7].c_str(), nullptr);
    out.push_back(r);
  }
  return out;
}

}  // namespace siproj::harness
