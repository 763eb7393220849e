#ifndef SECLOC_ATTACK_SIM_HPP
#define SECLOC_ATTACK_SIM_HPP

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "secloc/channel_model.hpp"
#include "secloc/errors.hpp"
#include "secloc/random.hpp"

namespace secloc {

using Point = Eigen::Vector2d;

struct Topology {
  std::vector<Point> anchors;
  Point target = Point::Zero();
  std::vector<std::size_t> malicious;  // sorted, 0-based

  std::size_t size() const { return anchors.size(); }

  bool is_malicious(std::size_t i) const {
    return std::binary_search(malicious.begin(), malicious.end(), i);
  }

  /// Throws ConfigError unless: every malicious index is in range, no anchor
  /// sits on the target, and the anchors are not all collinear (N >= 3).
  void validate() const;
};

/// True when the points span the plane (some triple has non-zero area
/// relative to the point spread).
inline bool spans_plane(const std::vector<Point>& points) {
  if (points.size() < 3) return false;
  double scale = 0.0;
  for (const auto& p : points) scale = std::max(scale, (p - points[0]).norm());
  if (scale == 0.0) return false;
  const Point& a = points[0];
  // Farthest point from a fixes a direction; look for any point off that line.
  std::size_t far = 0;
  for (std::size_t i = 1; i < points.size(); ++i)
    if ((points[i] - a).norm() > (points[far] - a).norm()) far = i;
  const Point dir = (points[far] - a) / (points[far] - a).norm();
  for (const auto& p : points) {
    const Point v = p - a;
    const double off = std::abs(dir.x() * v.y() - dir.y() * v.x());
    if (off > 1e-9 * scale) return true;
  }
  return false;
}

inline void Topology::validate() const {
  if (anchors.size() < 3)
    throw ConfigError("topology needs at least 3 anchors");
  if (!std::is_sorted(malicious.begin(), malicious.end()) ||
      std::adjacent_find(malicious.begin(), malicious.end()) != malicious.end())
    throw ConfigError("malicious index set must be sorted and unique");
  if (!malicious.empty() && malicious.back() >= anchors.size())
    throw ConfigError("malicious index out of range");
  for (const auto& a : anchors) {
    if (!a.allFinite() || !target.allFinite())
      throw ConfigError("topology coordinates must be finite");
    if ((a - target).norm() <= 0.0)
      throw ConfigError("an anchor coincides with the target");
  }
  if (!spans_plane(anchors)) throw ConfigError("anchors are collinear");
}

enum class AttackKind { none, uncoordinated, coordinated };

inline std::string to_string(AttackKind k) {
  switch (k) {
    case AttackKind::none: return "none";
    case AttackKind::uncoordinated: return "uncoordinated";
    case AttackKind::coordinated: return "coordinated";
  }
  return "?";
}

struct AttackSpec {
  AttackKind kind = AttackKind::none;
  std::optional<double> sigma_att;  // dB, uncoordinated
  std::optional<Point> t_att;       // coordinated

  static AttackSpec none() { return {}; }
  static AttackSpec uncoordinated(double sigma_att) {
    return {AttackKind::uncoordinated, sigma_att, std::nullopt};
  }
  static AttackSpec coordinated(const Point& t_att) {
    return {AttackKind::coordinated, std::nullopt, t_att};
  }

  void validate(const Topology& topology) const {
    switch (kind) {
      case AttackKind::none:
        break;
      case AttackKind::uncoordinated:
        if (!sigma_att || !std::isfinite(*sigma_att) || *sigma_att < 0.0)
          throw ConfigError("uncoordinated attack needs sigma_att >= 0");
        break;
      case AttackKind::coordinated:
        if (!t_att || !t_att->allFinite())
          throw ConfigError("coordinated attack needs a finite t_att");
        for (const auto& a : topology.anchors)
          if ((a - *t_att).norm() <= 0.0)
            throw ConfigError("t_att coincides with an anchor");
        break;
    }
  }
};

/// N x P received powers (dBm), one row per anchor.
struct MeasurementMatrix {
  Eigen::MatrixXd rssi;

  std::size_t anchors() const { return static_cast<std::size_t>(rssi.rows()); }
  std::size_t packets() const { return static_cast<std::size_t>(rssi.cols()); }

  Eigen::VectorXd row_means() const { return rssi.rowwise().mean(); }
};

/// Ratio of the attacker-intended range to the true range.
inline double chi_factor(const Point& anchor, const Point& target,
                         const Point& t_att) {
  const double true_range = (target - anchor).norm();
  if (!(true_range > 0.0))
    throw DomainError("anchor coincides with the target");
  return (t_att - anchor).norm() / true_range;
}

/// Draws the measurement matrix for the given attack. Noise is consumed row by
/// row, packet by packet (eta then, for uncoordinated malicious rows, kappa),
/// so the same seed always yields the same matrix.
inline MeasurementMatrix simulate_measurements(const Topology& topology,
                                               const PathLossParams& params,
                                               const AttackSpec& attack,
                                               std::size_t packets,
                                               std::uint64_t seed) {
  if (packets < 1) throw ConfigError("packets must be >= 1");
  params.validate();
  topology.validate();
  attack.validate(topology);

  Rng rng = make_rng(seed);
  std::normal_distribution<double> eta(0.0, 1.0);

  const std::size_t n = topology.size();
  MeasurementMatrix m;
  m.rssi.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(packets));
  for (std::size_t i = 0; i < n; ++i) {
    const Point& a = topology.anchors[i];
    const bool bad = topology.is_malicious(i);
    double mean = mean_rssi(params, (topology.target - a).norm());
    if (bad && attack.kind == AttackKind::coordinated) {
      const double chi = chi_factor(a, topology.target, *attack.t_att);
      mean -= 10.0 * params.n * std::log10(chi);
    }
    const bool jitter = bad && attack.kind == AttackKind::uncoordinated;
    for (std::size_t j = 0; j < packets; ++j) {
      double v = mean + params.sigma * eta(rng);
      if (jitter) v += *attack.sigma_att * eta(rng);
      m.rssi(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  return m;
}

/// Spatial restriction on which anchors may be chosen as malicious.
struct PlacementConstraint {
  enum class Kind { anywhere, within_radius, beyond_radius };
  Kind kind = Kind::anywhere;
  double radius = 0.0;
  Point center = Point::Zero();

  static PlacementConstraint anywhere() { return {}; }
  static PlacementConstraint within(double r, const Point& c) {
    return {Kind::within_radius, r, c};
  }
  static PlacementConstraint beyond(double r, const Point& c) {
    return {Kind::beyond_radius, r, c};
  }

  bool admits(const Point& p) const {
    switch (kind) {
      case Kind::anywhere: return true;
      case Kind::within_radius: return (p - center).norm() <= radius;
      case Kind::beyond_radius: return (p - center).norm() > radius;
    }
    return false;
  }
};

/// Number of malicious anchors implied by a fraction: round(fraction * N).
inline std::size_t malicious_count(std::size_t n_anchors, double fraction) {
  if (!(fraction >= 0.0 && fraction <= 1.0))
    throw ConfigError("malicious fraction must lie in [0, 1]");
  return static_cast<std::size_t>(
      std::llround(fraction * static_cast<double>(n_anchors)));
}

/// Uniformly picks round(fraction * N) distinct anchors among those admitted
/// by `constraint`. Returned indices are sorted.
inline std::vector<std::size_t> select_malicious(
    const std::vector<Point>& anchors, double fraction,
    const PlacementConstraint& constraint, std::uint64_t seed) {
  const std::size_t want = malicious_count(anchors.size(), fraction);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < anchors.size(); ++i)
    if (constraint.admits(anchors[i])) pool.push_back(i);
  if (pool.size() < want)
    throw ConfigError("placement constraint admits " +
                      std::to_string(pool.size()) + " anchors, need " +
                      std::to_string(want));
  Rng rng = make_rng(seed);
  // Partial Fisher-Yates.
  for (std::size_t k = 0; k < want; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
    std::swap(pool[k], pool[pick(rng)]);
  }
  pool.resize(want);
  std::sort(pool.begin(), pool.end());
  return pool;
}

/// Anchors uniform on [0, area]^2, rejecting any closer than `min_separation`
/// to the target.
inline std::vector<Point> random_anchors(std::size_t count, double area,
                                         const Point& target,
                                         std::uint64_t seed,
                                         double min_separation = 1.0) {
  if (count < 3) throw ConfigError("need at least 3 anchors");
  if (!(area > 0.0)) throw ConfigError("area must be positive");
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> coord(0.0, area);
  std::vector<Point> out;
  out.reserve(count);
  while (out.size() < count) {
    const double x = coord(rng);
    const double y = coord(rng);
    Point p(x, y);
    if ((p - target).norm() >= min_separation) out.push_back(p);
  }
  if (!spans_plane(out)) throw ConfigError("generated anchors are collinear");
  return out;
}

}  // namespace secloc

#endif  // SECLOC_ATTACK_SIM_HPP
