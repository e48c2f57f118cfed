#pragma once

#include <filesystem>
#include <string>

#include "lanedrop/metrics.hpp"

namespace lanedrop::svg {

struct HeatmapStyle {
  std::string title;
  std::string value_label;
  double vmin = 0.0;
  double vmax = 0.0;  // vmax <= vmin: autoscale to the data
  int cell_px = 6;
};

// Time on the horizontal axis, distance on the vertical (origin at the
// bottom), blue -> green -> yellow -> red color ramp with a labeled bar.
void write_heatmap(const std::filesystem::path& path, const metrics::Grid& grid,
                   const HeatmapStyle& style);

}  // namespace lanedrop::svg
