#pragma once

#include <optional>
#include <string>
#include <vector>

namespace hal {

struct PlotSeries {
  std::string label;
  std::vector<double> x;
  std::vector<double> y;
};

// Line chart with log-spaced x ticks at the data points and an optional
// dashed horizontal reference line. Output is deterministic byte-for-byte
// given identical inputs.
void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<PlotSeries>& series,
                         std::optional<double> dashed_hline, bool log_x);

struct HistogramPanel {
  std::string label;
  std::vector<double> values;
  // Normal(0, variance) overlay drawn when variance > 0.
  double overlay_variance = 0.0;
};

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel,
                         const std::vector<HistogramPanel>& panels);

}  // namespace hal
