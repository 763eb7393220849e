#ifndef SECLOC_HARNESS_CSV_HPP
#define SECLOC_HARNESS_CSV_HPP

#include <cstddef>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "secloc/errors.hpp"
#include "secloc/harness/config.hpp"
#include "secloc/harness/monte_carlo.hpp"
#include "secloc/topology_io.hpp"

namespace secloc::harness {

inline constexpr std::string_view kCsvHeader =
    "axis_value,estimator,rmse_m,crlb_m,trials_ok,trials_failed,mean_tp,mean_fp";

namespace detail {

inline std::string opt(const std::optional<double>& v) {
  return v ? secloc::detail::format_double(*v) : std::string();
}

inline std::optional<double> parse_opt(const std::string& field, const std::string& where) {
  if (field.empty()) return std::nullopt;
  return secloc::detail::parse_double(field, where);
}

}  // namespace detail

/// Numbers use the shortest round-trip decimal form and counts are written
/// without grouping, so the stream's locale never matters.
/// Empty fields mean "absent".
inline void write_csv(std::ostream& out, const std::vector<SweepPoint>& points) {
  out << kCsvHeader << '\n';
  for (const auto& p : points) {
    for (const auto& r : p.summary.rows) {
      out << detail::opt(p.axis_value) << ',' << r.name << ',' << detail::opt(r.rmse) << ','
          << detail::opt(r.crlb) << ',' << std::to_string(r.trials_ok) << ','
          << std::to_string(r.trials_failed) << ','
          << detail::opt(r.mean_tp) << ',' << detail::opt(r.mean_fp) << '\n';
    }
  }
}

inline std::string to_csv(const std::vector<SweepPoint>& points) {
  std::ostringstream os;
  write_csv(os, points);
  return os.str();
}

inline void emit_csv(const std::vector<SweepPoint>& points, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  write_csv(out, points);
  out.flush();
  if (!out) throw IoError("write failed for " + path);
}

/// Inverse of write_csv. Rows sharing an axis value are grouped into one
/// point, in file order.
inline std::vector<SweepPoint> parse_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader)
    throw ConfigError("CSV header mismatch");
  std::vector<SweepPoint> points;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = detail::split(line, ',');
    const std::string where = "csv line " + std::to_string(lineno);
    if (f.size() != 8) throw ConfigError(where + ": expected 8 fields");
    const auto axis = detail::parse_opt(f[0], where);
    if (points.empty() || points.back().axis_value != axis) points.push_back({axis, {}});
    EstimatorSummary r;
    r.name = f[1];
    r.rmse = detail::parse_opt(f[2], where);
    r.crlb = detail::parse_opt(f[3], where);
    r.trials_ok = detail::to_uint(where, f[4]);
    r.trials_failed = detail::to_uint(where, f[5]);
    r.mean_tp = detail::parse_opt(f[6], where);
    r.mean_fp = detail::parse_opt(f[7], where);
    points.back().summary.rows.push_back(std::move(r));
  }
  for (auto& p : points)
    if (!p.summary.rows.empty())
      p.summary.trials = p.summary.rows.front().trials_ok + p.summary.rows.front().trials_failed;
  return points;
}

}  // namespace secloc::harness

#endif  // SECLOC_HARNESS_CSV_HPP
