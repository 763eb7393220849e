#ifndef SECLOC_TESTS_ORACLES_HPP
#define SECLOC_TESTS_ORACLES_HPP

// Reference computations shared by the unit tests and the acceptance run.
// Each one avoids the library code it is used to check.

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "secloc/attack_sim.hpp"
#include "secloc/channel_model.hpp"
#include "secloc/estimators.hpp"
#include "secloc/crlb.hpp"

namespace secloc::oracle {

// Sample mean and variance of d and d^2 where d = 10^((p0 - p) / 10n),
// p ~ N(mean_rssi(d_true), sigma^2). Independent of the closed forms.
struct Moments {
  double var_d, se_d, var_d2, se_d2;
};

inline Moments sample_moments(const PathLossParams& p, double d_true, int draws, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, p.sigma);
  const double mu = p.p0 - 10.0 * p.n * std::log10(d_true);
  double m1 = 0, m2 = 0, q1 = 0, q2 = 0, m4 = 0, q4 = 0;
  // Fourth central moments give the standard error of each sample variance.
  std::vector<double> ds(static_cast<std::size_t>(draws));
  for (auto& d : ds) d = std::pow(10.0, (p.p0 - (mu + noise(rng))) / (10.0 * p.n));
  for (double d : ds) {
    m1 += d;
    q1 += d * d;
  }
  m1 /= draws;
  q1 /= draws;
  for (double d : ds) {
    const double d2 = d * d;
    m2 += d2;
    q2 += d2 * d2;
  }
  m2 /= draws;
  q2 /= draws;
  const double var_d = q1 - m1 * m1;
  const double var_d2 = q2 - m2 * m2;
  for (double d : ds) {
    m4 += std::pow(d - m1, 4);
    q4 += std::pow(d * d - m2, 4);
  }
  m4 /= draws;
  q4 /= draws;
  return {var_d, std::sqrt((m4 - var_d * var_d) / draws), var_d2,
          std::sqrt((q4 - var_d2 * var_d2) / draws)};
}

// Exact l1 regression for three unknowns: some optimum interpolates three
// rows, so scanning every non-singular triple finds the minimum.
struct LpOracle {
  Eigen::Vector3d u;
  double objective;
};

inline LpOracle lp_oracle(const LinearSystem& s) {
  LpOracle best{Eigen::Vector3d::Zero(), std::numeric_limits<double>::infinity()};
  const auto n = s.A.rows();
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = i + 1; j < n; ++j)
      for (Eigen::Index k = j + 1; k < n; ++k) {
        Eigen::Matrix3d M;
        M << s.A.row(i), s.A.row(j), s.A.row(k);
        const Eigen::FullPivLU<Eigen::Matrix3d> lu(M);
        if (lu.rank() < 3) continue;
        const Eigen::Vector3d u = lu.solve(Eigen::Vector3d(s.b(i), s.b(j), s.b(k)));
        const double obj = (s.A * u - s.b).lpNorm<1>();
        if (obj < best.objective) best = {u, obj};
      }
  return best;
}

// Empirical Fisher information: covariance of the log-likelihood gradient at
// the true target over single-packet draws generated here.

struct ScoreCovariance {
  Fim fim;     // per packet
  Fim se;  // standard error of each entry
};

inline ScoreCovariance empirical_fim(const Topology& topo, const PathLossParams& p,
                                     const AttackSpec& attack, long draws, std::uint64_t seed) {
  const double c = 10.0 * p.n / std::log(10.0);
  struct Row {
    double gx, gy, sd;
  };
  std::vector<Row> rows;
  for (std::size_t i = 0; i < topo.size(); ++i) {
    const bool bad = topo.is_malicious(i);
    Point at = topo.target;
    double var = p.sigma * p.sigma;
    if (bad && attack.kind == AttackKind::coordinated) at = *attack.t_att;
    if (bad && attack.kind == AttackKind::uncoordinated)
      var += *attack.sigma_att * *attack.sigma_att;
    // d mu / d t for mu = p0 - 10 n log10 ||a - x(t)||, with x(t) = t or t + offset.
    const Point d = topo.anchors[i] - at;
    const Point g = c * d / d.squaredNorm();
    rows.push_back({g.x() / var, g.y() / var, std::sqrt(var)});
  }
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, 1.0);
  double sxx = 0, sxy = 0, syy = 0, qxx = 0, qxy = 0, qyy = 0;
  for (long k = 0; k < draws; ++k) {
    double sx = 0, sy = 0;
    for (const auto& r : rows) {
      const double e = r.sd * z(rng);  // p - mu
      sx += e * r.gx;
      sy += e * r.gy;
    }
    const double xx = sx * sx, xy = sx * sy, yy = sy * sy;
    sxx += xx;
    sxy += xy;
    syy += yy;
    qxx += xx * xx;
    qxy += xy * xy;
    qyy += yy * yy;
  }
  const double n = static_cast<double>(draws);
  const Fim m{sxx / n, sxy / n, syy / n};
  const auto se = [n](double mean, double sq) { return std::sqrt((sq / n - mean * mean) / n); };
  return {m, {se(m.xx, qxx), se(m.xy, qxy), se(m.yy, qyy)}};
}

}  // namespace secloc::oracle

#endif  // SECLOC_TESTS_ORACLES_HPP
