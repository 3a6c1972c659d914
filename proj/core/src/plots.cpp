#include "hal/plots.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "hal/io.hpp"

namespace hal {

namespace {

const char* kColors[] = {"#1f6fb4", "#d1495b", "#3f7d3a", "#8d6708",
                         "#6a4c93", "#2a9d8f", "#aa3e98", "#555555"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

struct Frame {
  double width = 760, height = 480;
  double left = 70, right = 180, top = 40, bottom = 55;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  bool log_x = false;

  double tx(double x) const {
    const double a = log_x ? std::log(x) : x;
    const double lo = log_x ? std::log(xmin) : xmin;
    const double hi = log_x ? std::log(xmax) : xmax;
    const double span = hi - lo == 0.0 ? 1.0 : hi - lo;
    return left + (a - lo) / span * (width - left - right);
  }
  double ty(double y) const {
    const double span = ymax - ymin == 0.0 ? 1.0 : ymax - ymin;
    return height - bottom - (y - ymin) / span * (height - top - bottom);
  }
};

void open_svg(std::ostringstream& s, double width, double height) {
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
    << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
    << height << "\">\n"
    << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

void axis_labels(std::ostringstream& s, const Frame& f, const std::string& title,
                 const std::string& xlabel, const std::string& ylabel) {
  s << "<text x=\"" << num(f.left) << "\" y=\"22\" font-size=\"15\" "
       "font-family=\"sans-serif\">"
    << title << "</text>\n";
  s << "<text x=\"" << num((f.left + f.width - f.right) / 2.0) << "\" y=\""
    << num(f.height - 12) << "\" font-size=\"12\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\">"
    << xlabel << "</text>\n";
  s << "<text x=\"16\" y=\"" << num((f.top + f.height - f.bottom) / 2.0)
    << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\" "
       "transform=\"rotate(-90 16 "
    << num((f.top + f.height - f.bottom) / 2.0) << ")\">" << ylabel
    << "</text>\n";
  s << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.height - f.bottom)
    << "\" x2=\"" << num(f.width - f.right) << "\" y2=\""
    << num(f.height - f.bottom) << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.top) << "\" x2=\""
    << num(f.left) << "\" y2=\"" << num(f.height - f.bottom)
    << "\" stroke=\"black\"/>\n";
}

}  // namespace

void write_line_plot_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel, const std::string& ylabel,
                         const std::vector<PlotSeries>& series,
                         std::optional<double> dashed_hline, bool log_x) {
  Frame f;
  f.log_x = log_x;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const PlotSeries& s : series) {
    for (double x : s.x) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
    }
    for (double y : s.y) {
      if (!std::isfinite(y)) continue;
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
  }
  if (ymin > ymax) {
    ymin = 0;
    ymax = 1;
  }
  if (dashed_hline) {
    ymin = std::min(ymin, *dashed_hline);
    ymax = std::max(ymax, *dashed_hline);
  }
  const double pad = (ymax - ymin == 0.0 ? 1.0 : ymax - ymin) * 0.08;
  f.xmin = xmin;
  f.xmax = xmax;
  f.ymin = ymin - pad;
  f.ymax = ymax + pad;

  std::ostringstream s;
  open_svg(s, f.width, f.height);
  axis_labels(s, f, title, xlabel, ylabel);

  // x ticks at the observed points, y ticks at 5 even stops
  for (const PlotSeries& ser : series) {
    for (double x : ser.x) {
      s << "<text x=\"" << num(f.tx(x)) << "\" y=\""
        << num(f.height - f.bottom + 16)
        << "\" font-size=\"10\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << static_cast<long long>(std::llround(x)) << "</text>\n";
    }
    break;
  }
  for (int t = 0; t <= 4; ++t) {
    const double y = f.ymin + (f.ymax - f.ymin) * t / 4.0;
    s << "<text x=\"" << num(f.left - 6) << "\" y=\"" << num(f.ty(y) + 3)
      << "\" font-size=\"10\" text-anchor=\"end\" font-family=\"sans-serif\">"
      << num(y) << "</text>\n";
  }

  if (dashed_hline) {
    s << "<line x1=\"" << num(f.left) << "\" y1=\"" << num(f.ty(*dashed_hline))
      << "\" x2=\"" << num(f.width - f.right) << "\" y2=\""
      << num(f.ty(*dashed_hline))
      << "\" stroke=\"black\" stroke-dasharray=\"6 4\"/>\n";
  }

  for (std::size_t i = 0; i < series.size(); ++i) {
    const PlotSeries& ser = series[i];
    const char* color = kColors[i % 8];
    s << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t j = 0; j < ser.x.size(); ++j) {
      if (!std::isfinite(ser.y[j])) continue;
      s << num(f.tx(ser.x[j])) << "," << num(f.ty(ser.y[j])) << " ";
    }
    s << "\"/>\n";
    for (std::size_t j = 0; j < ser.x.size(); ++j) {
      if (!std::isfinite(ser.y[j])) continue;
      s << "<circle cx=\"" << num(f.tx(ser.x[j])) << "\" cy=\""
        << num(f.ty(ser.y[j])) << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    const double ly = f.top + 16.0 * static_cast<double>(i);
    s << "<line x1=\"" << num(f.width - f.right + 8) << "\" y1=\"" << num(ly)
      << "\" x2=\"" << num(f.width - f.right + 28) << "\" y2=\"" << num(ly)
      << "\" stroke=\"" << color << "\" stroke-width=\"1.5\"/>\n";
    s << "<text x=\"" << num(f.width - f.right + 32) << "\" y=\"" << num(ly + 3)
      << "\" font-size=\"10\" font-family=\"sans-serif\">" << ser.label
      << "</text>\n";
  }
  s << "</svg>\n";
  write_text_file(path, s.str());
}

void write_histogram_svg(const std::string& path, const std::string& title,
                         const std::string& xlabel,
                         const std::vector<HistogramPanel>& panels) {
  const double panel_h = 170, panel_w = 560;
  const double left = 60, top = 36, gap = 26;
  const double width = panel_w + left + 40;
  const double height = top + panels.size() * (panel_h + gap) + 30;

  std::ostringstream s;
  open_svg(s, width, height);
  s << "<text x=\"" << num(left) << "\" y=\"22\" font-size=\"15\" "
       "font-family=\"sans-serif\">"
    << title << "</text>\n";

  for (std::size_t pi = 0; pi < panels.size(); ++pi) {
    const HistogramPanel& panel = panels[pi];
    const double oy = top + static_cast<double>(pi) * (panel_h + gap);
    double lo = -1.0, hi = 1.0;
    if (!panel.values.empty()) {
      lo = *std::min_element(panel.values.begin(), panel.values.end());
      hi = *std::max_element(panel.values.begin(), panel.values.end());
    }
    if (panel.overlay_variance > 0.0) {
      const double sd = std::sqrt(panel.overlay_variance);
      lo = std::min(lo, -3.5 * sd);
      hi = std::max(hi, 3.5 * sd);
    }
    if (hi <= lo) hi = lo + 1.0;
    const int nbins = 30;
    const double bw = (hi - lo) / nbins;
    std::vector<double> counts(nbins, 0.0);
    for (double v : panel.values) {
      int b = static_cast<int>((v - lo) / bw);
      b = std::clamp(b, 0, nbins - 1);
      counts[static_cast<std::size_t>(b)] += 1.0;
    }
    // normalize to a density so the overlay is comparable
    const double total = std::max(1.0, static_cast<double>(panel.values.size()));
    double dmax = 0.0;
    for (double& c : counts) {
      c /= total * bw;
      dmax = std::max(dmax, c);
    }
    if (panel.overlay_variance > 0.0) {
      dmax = std::max(dmax, 1.0 / std::sqrt(2.0 * M_PI * panel.overlay_variance));
    }
    if (dmax <= 0.0) dmax = 1.0;

    auto px = [&](double v) { return left + (v - lo) / (hi - lo) * panel_w; };
    auto py = [&](double d) { return oy + panel_h - d / dmax * (panel_h - 24); };

    s << "<text x=\"" << num(left) << "\" y=\"" << num(oy + 12)
      << "\" font-size=\"11\" font-family=\"sans-serif\">" << panel.label
      << "</text>\n";
    s << "<line x1=\"" << num(left) << "\" y1=\"" << num(oy + panel_h)
      << "\" x2=\"" << num(left + panel_w) << "\" y2=\"" << num(oy + panel_h)
      << "\" stroke=\"black\"/>\n";
    for (int b = 0; b < nbins; ++b) {
      const double c = counts[static_cast<std::size_t>(b)];
      if (c <= 0.0) continue;
      s << "<rect x=\"" << num(px(lo + b * bw)) << "\" y=\"" << num(py(c))
        << "\" width=\"" << num(panel_w / nbins - 0.5) << "\" height=\""
        << num(oy + panel_h - py(c)) << "\" fill=\"#9ecbe3\"/>\n";
    }
    if (panel.overlay_variance > 0.0) {
      s << "<polyline fill=\"none\" stroke=\"#d1495b\" stroke-width=\"1.5\" "
           "points=\"";
      for (int t = 0; t <= 160; ++t) {
        const double v = lo + (hi - lo) * t / 160.0;
        const double d = std::exp(-0.5 * v * v / panel.overlay_variance) /
                         std::sqrt(2.0 * M_PI * panel.overlay_variance);
        s << num(px(v)) << "," << num(py(d)) << " ";
      }
      s << "\"/>\n";
    }
    // tick labels at the extremes and zero
    for (double v : {lo, 0.0, hi}) {
      if (v < lo || v > hi) continue;
      s << "<text x=\"" << num(px(v)) << "\" y=\"" << num(oy + panel_h + 14)
        << "\" font-size=\"10\" text-anchor=\"middle\" "
           "font-family=\"sans-serif\">"
        << num(v) << "</text>\n";
    }
  }
  s << "<text x=\"" << num(left + panel_w / 2) << "\" y=\"" << num(height - 8)
    << "\" font-size=\"12\" text-anchor=\"middle\" font-family=\"sans-serif\">"
    << xlabel << "</text>\n";
  s << "</svg>\n";
  write_text_file(path, s.str());
}

}  // namespace hal
