#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "psim/diagnostics.hpp"
#include "psim/system.hpp"

namespace psim {

inline constexpr int kFormatVersion = 1;
inline constexpr const char* kArtifactVersion = "0.1.0";

/// 17 significant digits, "nan" for missing values.
std::string format_double(double v);

std::uint64_t fnv1a_hash(const std::string& text);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  void write(const std::filesystem::path& path) const;
};

/// Header and rows for diagnostics.csv; time_scale > 0 adds a time_s column.
CsvTable diagnostics_table(const std::vector<DiagnosticsRecord>& records, double time_scale);

/// Cellwise fields; anion columns are empty outside the intrinsic layer.
CsvTable profile_table(const Scenario& sc, const State& st, double length_scale = 0.0);

struct Series {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

/// Polyline chart with a log10 y axis; non-positive samples are dropped.
std::string svg_log_plot(const std::string& title, const std::string& xlabel, const std::vector<Series>& series);

void write_text(const std::filesystem::path& path, const std::string& text);

struct ManifestInfo {
  std::string command;
  std::string config_path;
  std::string config_text;
  std::vector<std::string> files;
  std::string status = "ok";
};

std::string manifest_json(const ManifestInfo& info);

}  // namespace psim
