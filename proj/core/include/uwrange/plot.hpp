#pragma once

#include <optional>
#include <string>

#include "uwrange/experiment.hpp"

namespace uwrange {

/// What to draw from a summary CSV: one series per method, the chosen metric
/// against the chosen sweep axis, with the other axis pinned.
struct PlotSpec {
  std::string x_axis = "snr_db";   // "snr_db" or "delta_c"
  std::string metric = "pcl";     // "pcl" or "mae"
  std::optional<double> fixed_snr_db;
  std::optional<double> fixed_delta_c;
  std::string title;
};

/// Deterministic SVG line plot with error bars from a summary CSV.  Throws on
/// malformed input or when the selection leaves no data.
void emit_plot(const std::string& summary_csv_path, const PlotSpec& spec,
               const std::string& svg_path);

}  // namespace uwrange
