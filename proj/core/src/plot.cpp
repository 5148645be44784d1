#include "uwrange/plot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <stdexcept>

namespace uwrange {

namespace {

struct Point {
  double x, mean, std_dev;
};

std::string fmt(double v, const char* pattern = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), pattern, v);
  return buf;
}

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                          "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

void emit_plot(const std::string& summary_csv_path, const PlotSpec& spec,
               const std::string& svg_path) {
  if (spec.x_axis != "snr_db" && spec.x_axis != "delta_c") {
    throw std::invalid_argument("emit_plot: x_axis must be snr_db or delta_c");
  }
  if (spec.metric != "pcl" && spec.metric != "mae") {
    throw std::invalid_argument("emit_plot: metric must be pcl or mae");
  }
  const std::vector<SummaryRow> rows = read_summary_csv(summary_csv_path);

  std::map<std::string, std::vector<Point>> series;
  for (const SummaryRow& r : rows) {
    if (spec.fixed_snr_db && r.snr_db != *spec.fixed_snr_db) continue;
    if (spec.fixed_delta_c && r.delta_c != *spec.fixed_delta_c) continue;
    const double x = spec.x_axis == "snr_db" ? r.snr_db : r.delta_c;
    const double mean = spec.metric == "pcl" ? r.pcl_mean : r.mae_mean;
    const double std_dev = spec.metric == "pcl" ? r.pcl_std : r.mae_std;
    series[r.method].push_back({x, mean, std_dev});
  }
  if (series.empty()) {
    throw std::runtime_error("emit_plot: selection left no data series");
  }
  for (auto& [method, points] : series) {
    if (points.empty()) {
      throw std::runtime_error("emit_plot: empty series for method " + method);
    }
    std::sort(points.begin(), points.end(),
              [](const Point& a, const Point& b) { return a.x < b.x; });
  }

  double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
  for (const auto& [method, points] : series) {
    for (const Point& p : points) {
      x_min = std::min(x_min, p.x);
      x_max = std::max(x_max, p.x);
      y_min = std::min(y_min, p.mean - p.std_dev);
      y_max = std::max(y_max, p.mean + p.std_dev);
    }
  }
  if (x_max == x_min) {
    x_min -= 1.0;
    x_max += 1.0;
  }
  if (y_max == y_min) {
    y_min -= 1.0;
    y_max += 1.0;
  }
  const double y_pad = 0.05 * (y_max - y_min);
  y_min -= y_pad;
  y_max += y_pad;

  const double width = 640.0, height = 440.0;
  const double left = 70.0, right = 20.0, top = 40.0, bottom = 50.0;
  const double plot_w = width - left - right;
  const double plot_h = height - top - bottom;
  auto sx = [&](double x) { return left + (x - x_min) / (x_max - x_min) * plot_w; };
  auto sy = [&](double y) { return top + (y_max - y) / (y_max - y_min) * plot_h; };

  std::ofstream os(svg_path);
  if (!os) throw std::runtime_error("emit_plot: cannot open " + svg_path);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
     << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  os << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";

  const std::string title =
      spec.title.empty() ? spec.metric + " vs " + spec.x_axis : spec.title;
  os << "<text x=\"" << width / 2 << "\" y=\"22\" text-anchor=\"middle\" "
        "font-family=\"sans-serif\" font-size=\"15\">"
     << title << "</text>\n";

  // Axes and ticks.
  os << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << plot_w
     << "\" height=\"" << plot_h << "\" fill=\"none\" stroke=\"black\"/>\n";
  const int ticks = 5;
  for (int t = 0; t <= ticks; ++t) {
    const double fx = x_min + (x_max - x_min) * t / ticks;
    const double fy = y_min + (y_max - y_min) * t / ticks;
    os << "<line x1=\"" << fmt(sx(fx)) << "\" y1=\"" << top + plot_h << "\" x2=\""
       << fmt(sx(fx)) << "\" y2=\"" << top + plot_h + 5 << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << fmt(sx(fx)) << "\" y=\"" << top + plot_h + 20
       << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">"
       << fmt(fx, "%g") << "</text>\n";
    os << "<line x1=\"" << left - 5 << "\" y1=\"" << fmt(sy(fy)) << "\" x2=\"" << left
       << "\" y2=\"" << fmt(sy(fy)) << "\" stroke=\"black\"/>\n";
    os << "<text x=\"" << left - 9 << "\" y=\"" << fmt(sy(fy) + 4)
       << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
       << fmt(fy, "%g") << "</text>\n";
  }
  os << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
     << spec.x_axis << "</text>\n";
  os << "<text x=\"16\" y=\"" << top + plot_h / 2
     << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
        "transform=\"rotate(-90 16 "
     << top + plot_h / 2 << ")\">" << spec.metric << "</text>\n";

  // Series: error bars, polyline, markers, legend.
  int color_index = 0;
  double legend_y = top + 14.0;
  for (const auto& [method, points] : series) {
    const char* color = kPalette[color_index % 8];
    ++color_index;
    for (const Point& p : points) {
      if (p.std_dev > 0.0) {
        os << "<line x1=\"" << fmt(sx(p.x)) << "\" y1=\"" << fmt(sy(p.mean - p.std_dev))
           << "\" x2=\"" << fmt(sx(p.x)) << "\" y2=\"" << fmt(sy(p.mean + p.std_dev))
           << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
      }
    }
    os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < points.size(); ++i) {
      if (i > 0) os << ' ';
      os << fmt(sx(points[i].x)) << ',' << fmt(sy(points[i].mean));
    }
    os << "\"/>\n";
    for (const Point& p : points) {
      os << "<circle cx=\"" << fmt(sx(p.x)) << "\" cy=\"" << fmt(sy(p.mean))
         << "\" r=\"2.5\" fill=\"" << color << "\"/>\n";
    }
    os << "<rect x=\"" << left + plot_w - 130 << "\" y=\"" << fmt(legend_y - 8)
       << "\" width=\"10\" height=\"10\" fill=\"" << color << "\"/>\n";
    os << "<text x=\"" << left + plot_w - 115 << "\" y=\"" << fmt(legend_y + 1)
       << "\" font-family=\"sans-serif\" font-size=\"12\">" << method << "</text>\n";
    legend_y += 16.0;
  }
  os << "</svg>\n";
}

}  // namespace uwrange
