#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "atr/eval/eval.hpp"

namespace atr::eval {

/// 8-bit RGB raster, row-major from the top-left corner.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;
};

enum class HeatmapMetric { kForward, kYaw };

struct HeatmapStyle {
  HeatmapMetric metric = HeatmapMetric::kForward;
  /// Errors at or above the cap map to the lightest gray.
  double cap = 1.0;
  /// Pixels per cell edge.
  int block = 1;
};

/// One block per cell: c_v grows to the right, c_w grows upward. Gray level
/// is 255 * min(err / cap, 1), so a perfect cell is black. Incomplete and
/// unevaluated cells are drawn at full scale.
Image render_heatmap(const HeatmapGrid& g, const HeatmapStyle& style = {});

/// Binary PPM (P6).
void write_ppm(const Image& img, std::ostream& os);
Image read_ppm(std::istream& is);

struct Series {
  std::string name;
  std::vector<double> y;
};

/// Line plot of each series against x with axes, ticks and a legend.
std::string render_series_svg(const std::string& x_label, const std::vector<double>& x,
                              const std::vector<Series>& series);

/// Command area against the forward-velocity threshold.
std::string render_area_svg(const std::vector<AreaPoint>& pts);

enum class PlotKind { kHeatmap, kSeries, kArea };
PlotKind plot_kind_from_string(const std::string& s);

/// Reads a CSV written by the tool and renders it. Heatmaps take a grid
/// CSV; series take any CSV whose first column is time; area takes an area
/// CSV or a grid CSV. Throws std::invalid_argument naming the expected
/// header on a schema mismatch.
void plot_file(const std::filesystem::path& in, PlotKind kind, const std::filesystem::path& out,
               const HeatmapStyle& style = {});

}  // namespace atr::eval
