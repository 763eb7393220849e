#ifndef SECLOC_HARNESS_SVG_HPP
#define SECLOC_HARNESS_SVG_HPP

// Minimal standalone SVG line plot: RMSE against the sweep axis, one polyline
// per estimator plus the CRLB (dashed).

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <limits>
#include <locale>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "secloc/errors.hpp"
#include "secloc/harness/monte_carlo.hpp"

namespace secloc::harness {

inline std::string render_svg(const std::vector<SweepPoint>& points,
                              std::string_view axis_label) {
  constexpr double W = 640, H = 420, L = 60, R = 130, T = 20, B = 50;
  std::map<std::string, std::vector<std::pair<double, double>>> series;
  std::vector<std::string> order;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double ymax = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    const double x = points[k].axis_value.value_or(static_cast<double>(k));
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
    for (const auto& r : points[k].summary.rows) {
      if (!r.rmse) continue;
      if (!series.count(r.name)) order.push_back(r.name);
      series[r.name].emplace_back(x, *r.rmse);
      ymax = std::max(ymax, *r.rmse);
    }
  }
  if (!(xmax > xmin)) {
    xmin -= 1.0;
    xmax += 1.0;
  }
  if (!(ymax > 0.0)) ymax = 1.0;
  const auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  const auto py = [&](double y) { return H - B - y / (ymax * 1.05) * (H - T - B); };

  static constexpr std::array<const char*, 9> palette = {
      "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
      "#8c564b", "#e377c2", "#7f7f7f", "#17becf"};

  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymax * 1.05 * i / 4.0;
    os << "<text x=\"" << px(xv) << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">"
       << xv << "</text>\n";
    os << "<text x=\"" << L - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">"
       << std::round(yv * 100.0) / 100.0 << "</text>\n";
  }
  os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">"
     << axis_label << "</text>\n";
  os << "<text x=\"14\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 14 "
     << (T + H - B) / 2 << ")\" text-anchor=\"middle\">RMSE (m)</text>\n";

  for (std::size_t s = 0; s < order.size(); ++s) {
    const auto& name = order[s];
    const char* colour = name == "crlb" ? "black" : palette[s % palette.size()];
    os << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\"";
    if (name == "crlb") os << " stroke-dasharray=\"6 4\"";
    os << " points=\"";
    for (const auto& [x, y] : series[name]) os << px(x) << ',' << py(y) << ' ';
    os << "\"/>\n";
    const double ly = T + 14.0 * static_cast<double>(s + 1);
    os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly - 4 << "\" x2=\"" << W - R + 30
       << "\" y2=\"" << ly - 4 << "\" stroke=\"" << colour << "\" stroke-width=\"2\"/>\n";
    os << "<text x=\"" << W - R + 36 << "\" y=\"" << ly << "\">" << name << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

inline void emit_svg(const std::vector<SweepPoint>& points, std::string_view axis_label,
                     const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << render_svg(points, axis_label);
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace secloc::harness

#endif  // SECLOC_HARNESS_SVG_HPP
