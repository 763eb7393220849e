#ifndef SECLOC_ESTIMATORS_HPP
#define SECLOC_ESTIMATORS_HPP

#include <Eigen/Core>
#include <Eigen/QR>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "secloc/attack_sim.hpp"
#include "secloc/channel_model.hpp"
#include "secloc/errors.hpp"
#include "secloc/random.hpp"

namespace secloc {

/// Linearised range equations A u = b with u = (tx, ty, tx^2 + ty^2).
/// Row i of A is (-2 ax, -2 ay, 1) and b_i = dbar_i^2 - ax^2 - ay^2.
struct LinearSystem {
  Eigen::Matrix<double, Eigen::Dynamic, 3> A;
  Eigen::VectorXd b;

  std::size_t rows() const { return static_cast<std::size_t>(A.rows()); }

  LinearSystem select(std::span<const std::size_t> idx) const {
    LinearSystem out;
    out.A.resize(static_cast<Eigen::Index>(idx.size()), 3);
    out.b.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const auto r = static_cast<Eigen::Index>(idx[k]);
      out.A.row(static_cast<Eigen::Index>(k)) = A.row(r);
      out.b(static_cast<Eigen::Index>(k)) = b(r);
    }
    return out;
  }
};

struct Estimate {
  Point position = Point::Constant(std::numeric_limits<double>::quiet_NaN());
  std::optional<double> auxiliary;      // third solution component
  std::vector<std::size_t> eliminated;  // anchors excluded, sorted
  int iterations = 0;
  bool converged = false;
};

inline constexpr double kConditionLimit = 1e12;

inline LinearSystem build_linear_system(std::span<const Point> anchors,
                                        const Eigen::VectorXd& mean_distances) {
  if (anchors.size() != static_cast<std::size_t>(mean_distances.size()))
    throw DomainError("anchor count and distance count differ");
  if (anchors.size() < 3)
    throw InsufficientAnchors("linear system needs at least 3 anchors");
  LinearSystem sys;
  const auto n = static_cast<Eigen::Index>(anchors.size());
  sys.A.resize(n, 3);
  sys.b.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Point& a = anchors[static_cast<std::size_t>(i)];
    sys.A(i, 0) = -2.0 * a.x();
    sys.A(i, 1) = -2.0 * a.y();
    sys.A(i, 2) = 1.0;
    const double d = mean_distances(i);
    sys.b(i) = d * d - a.squaredNorm();
  }
  return sys;
}

/// Range estimates from the packet-averaged power of each row (not the
/// average of per-packet ranges).
inline Eigen::VectorXd mean_distances(const MeasurementMatrix& m,
                                      const PathLossParams& params) {
  const Eigen::VectorXd mean = m.row_means();
  Eigen::VectorXd d(mean.size());
  for (Eigen::Index i = 0; i < mean.size(); ++i)
    d(i) = distance_from_rssi(params, mean(i));
  return d;
}

/// Weighted least squares argmin_u sum_i w_i (A_i u - b_i)^2.
///
/// Solves the row-scaled system by column-pivoted QR. Columns are rescaled
/// before the conditioning check so the guard measures geometry rather than
/// units: cond(A^T W A) = cond(W^1/2 A)^2 must stay below kConditionLimit.
inline Eigen::Vector3d solve_weighted(const LinearSystem& sys,
                                      const Eigen::VectorXd& weights) {
  if (sys.rows() < 3)
    throw InsufficientAnchors("weighted solve needs at least 3 rows");
  const double wmax = weights.maxCoeff();
  if (!(wmax > 0.0) || !std::isfinite(wmax) || weights.minCoeff() < 0.0)
    throw DomainError("weights must be finite and non-negative");
  const Eigen::VectorXd sw = (weights / wmax).cwiseSqrt();
  Eigen::Matrix<double, Eigen::Dynamic, 3> Aw = sw.asDiagonal() * sys.A;
  const Eigen::VectorXd bw = sw.cwiseProduct(sys.b);

  // The two position columns share one scale so that the guard does not
  // depend on how the anchor layout is oriented.
  const Eigen::Vector3d norms = Aw.colwise().norm().transpose();
  const double xy = std::hypot(norms(0), norms(1)) / std::numbers::sqrt2;
  const Eigen::Vector3d col_scale(xy, xy, norms(2));
  if ((col_scale.array() <= 0.0).any())
    throw DegenerateGeometry("linear system has an all-zero column");
  Aw = Aw * col_scale.cwiseInverse().asDiagonal();

  Eigen::JacobiSVD<Eigen::Matrix<double, Eigen::Dynamic, 3>> svd(Aw);
  const auto& s = svd.singularValues();
  const double cond = s(0) / s(2);
  if (!(s(2) > 0.0) || !(cond * cond < kConditionLimit))
    throw DegenerateGeometry("normal equations are ill-conditioned");

  Eigen::Vector3d u = Aw.colPivHouseholderQr().solve(bw);
  return u.cwiseQuotient(col_scale);
}

namespace detail {

inline Estimate estimate_from_solution(const Eigen::Vector3d& u) {
  Estimate e;
  e.position = u.head<2>();
  e.auxiliary = u(2);
  e.converged = e.position.allFinite();
  return e;
}

inline Eigen::VectorXd wls_weights(const PathLossParams& params,
                                   const Eigen::VectorXd& dbar) {
  Eigen::VectorXd w(dbar.size());
  if (params.sigma == 0.0) return Eigen::VectorXd::Ones(dbar.size());
  for (Eigen::Index i = 0; i < dbar.size(); ++i)
    w(i) = 1.0 / distance_sq_variance(params, dbar(i));
  return w;
}

inline void require_shape(const MeasurementMatrix& m,
                          std::span<const Point> anchors) {
  if (m.anchors() != anchors.size())
    throw DomainError("measurement rows and anchors differ in count");
  if (m.packets() < 1) throw DomainError("measurement matrix has no packets");
  if (anchors.size() < 3)
    throw InsufficientAnchors("estimator needs at least 3 anchors");
}

inline constexpr double kDbPerNeper = 10.0 / std::numbers::ln10;

}  // namespace detail

/// Unweighted least squares on the linearised system.
inline Estimate ls_estimate(const LinearSystem& sys) {
  return detail::estimate_from_solution(
      solve_weighted(sys, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(sys.rows()))));
}

/// WLS on a prepared system; weights are 1 / Var(dbar_i^2).
inline Estimate wls_estimate(const LinearSystem& sys,
                             const Eigen::VectorXd& dbar,
                             const PathLossParams& params) {
  return detail::estimate_from_solution(
      solve_weighted(sys, detail::wls_weights(params, dbar)));
}

inline Estimate wls_estimate(const MeasurementMatrix& m,
                             std::span<const Point> anchors,
                             const PathLossParams& params) {
  detail::require_shape(m, anchors);
  const Eigen::VectorXd dbar = mean_distances(m, params);
  return wls_estimate(build_linear_system(anchors, dbar), dbar, params);
}

/// Per-anchor outcome of the SWLS variance test.
struct SwlsScreen {
  Eigen::VectorXd sigma_hat;            // closed-form noise estimate per anchor
  Eigen::VectorXd mean_distance;        // dbar_i
  std::vector<std::size_t> kept;
  std::vector<std::size_t> eliminated;
};

/// Flags anchor i as malicious when its estimated noise std-dev reaches
/// zeta * sigma. An anchor whose packets are all identical has sigma_hat = 0
/// and is always kept.
inline SwlsScreen swls_screen(const MeasurementMatrix& m,
                              const PathLossParams& params, double zeta) {
  if (m.packets() < 2)
    throw DomainError("SWLS needs at least 2 packets per anchor");
  if (!(zeta > 0.0)) throw DomainError("zeta must be positive");
  SwlsScreen out;
  const auto n = m.rssi.rows();
  const auto p = m.rssi.cols();
  out.sigma_hat.resize(n);
  out.mean_distance = mean_distances(m, params);
  const double limit = zeta * params.sigma;
  Eigen::VectorXd d(p);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < p; ++j)
      d(j) = distance_from_rssi(params, m.rssi(i, j));
    const double mu = d.mean();
    const double var = (d.array() - mu).square().sum() / static_cast<double>(p - 1);
    const double s = estimate_noise_sigma(params, var, out.mean_distance(i));
    out.sigma_hat(i) = s;
    if (s < limit || s == 0.0)
      out.kept.push_back(static_cast<std::size_t>(i));
    else
      out.eliminated.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

/// Secure WLS: drop anchors failing the variance test, then WLS on the rest.
inline Estimate swls_estimate(const MeasurementMatrix& m,
                              std::span<const Point> anchors,
                              const PathLossParams& params, double zeta) {
  detail::require_shape(m, anchors);
  SwlsScreen screen = swls_screen(m, params, zeta);
  if (screen.kept.size() < 3)
    throw InsufficientSurvivors("SWLS kept " + std::to_string(screen.kept.size()) +
                                " anchors, need 3");
  std::vector<Point> kept_anchors;
  Eigen::VectorXd dbar(static_cast<Eigen::Index>(screen.kept.size()));
  for (std::size_t k = 0; k < screen.kept.size(); ++k) {
    kept_anchors.push_back(anchors[screen.kept[k]]);
    dbar(static_cast<Eigen::Index>(k)) =
        screen.mean_distance(static_cast<Eigen::Index>(screen.kept[k]));
  }
  Estimate e = wls_estimate(build_linear_system(kept_anchors, dbar), dbar, params);
  e.eliminated = std::move(screen.eliminated);
  return e;
}

// ---------------------------------------------------------------------------
// Maximum likelihood on the raw powers.

/// Sum over anchors and packets of (p_ij - p0 + 10 n log10 ||t - a_i||)^2.
class MlObjective {
 public:
  MlObjective(const MeasurementMatrix& m, std::span<const Point> anchors,
              const PathLossParams& params)
      : anchors_(anchors.begin(), anchors.end()),
        params_(params),
        mean_(m.row_means()),
        packets_(static_cast<double>(m.packets())) {
    detail::require_shape(m, anchors);
    within_ = 0.0;
    for (Eigen::Index i = 0; i < m.rssi.rows(); ++i)
      within_ += (m.rssi.row(i).array() - mean_(i)).square().sum();
  }

  /// +inf when t lands on an anchor.
  double value(const Point& t) const {
    double f = within_;
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      const double d = (t - anchors_[i]).norm();
      if (!(d >= kMinRange)) return std::numeric_limits<double>::infinity();
      const double e = residual(i, d);
      f += packets_ * e * e;
    }
    return f;
  }

  Point gradient(const Point& t) const {
    Point g = Point::Zero();
    for (std::size_t i = 0; i < anchors_.size(); ++i) {
      const Point diff = t - anchors_[i];
      const double d2 = diff.squaredNorm();
      const double e = residual(i, std::sqrt(d2));
      g += (2.0 * packets_ * e * params_.n * detail::kDbPerNeper / d2) * diff;
    }
    return g;
  }

  static constexpr double kMinRange = 1e-9;

 private:
  double residual(std::size_t i, double d) const {
    return mean_(static_cast<Eigen::Index>(i)) - params_.p0 +
           10.0 * params_.n * std::log10(d);
  }

  std::vector<Point> anchors_;
  PathLossParams params_;
  Eigen::VectorXd mean_;
  double packets_;
  double within_;
};

struct MlOptions {
  /// Relative to max(1, |f|): the objective grows with P and N.
  double gradient_tol = 1e-8;
  int max_iters = 500;
};

/// Local ML estimate by BFGS with Armijo backtracking, started at `init`.
inline Estimate ml_estimate(const MeasurementMatrix& m,
                            std::span<const Point> anchors,
                            const PathLossParams& params, const Point& init,
                            const MlOptions& opts = {}) {
  if (!init.allFinite()) throw DomainError("ML initial point must be finite");
  const MlObjective obj(m, anchors, params);

  Point t = init;
  double f = obj.value(t);
  Estimate e;
  if (!std::isfinite(f)) {
    // Starting on an anchor: nudge off it.
    t += Point(1e-6, 1e-6);
    f = obj.value(t);
  }
  Point g = obj.gradient(t);
  Eigen::Matrix2d H = Eigen::Matrix2d::Identity();
  bool scaled = false;
  int it = 0;
  bool stalled = false;
  const auto small = [&](const Point& grad, double fv) {
    return grad.norm() < opts.gradient_tol * std::max(1.0, std::abs(fv));
  };
  for (; it < opts.max_iters && !small(g, f); ++it) {
    Point dir = -H * g;
    if (dir.dot(g) >= 0.0) {
      H.setIdentity();
      dir = -g;
    }
    double step = 1.0;
    Point next;
    double fnext = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      next = t + step * dir;
      fnext = obj.value(next);
      if (std::isfinite(fnext) && fnext <= f + 1e-4 * step * g.dot(dir)) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted || !(fnext < f)) {
      stalled = true;
      break;
    }
    const Point gnext = obj.gradient(next);
    const Point s = next - t;
    const Point y = gnext - g;
    const double sy = s.dot(y);
    if (sy > 1e-300) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const double r = 1.0 / sy;
      const Eigen::Matrix2d I = Eigen::Matrix2d::Identity();
      H = (I - r * s * y.transpose()) * H * (I - r * y * s.transpose()) +
          r * s * s.transpose();
    }
    t = next;
    f = fnext;
    g = gnext;
  }
  e.position = t;
  e.iterations = it;
  // A stalled line search where no descent is representable counts as
  // converged when the gradient is at round-off level.
  const double roundoff = 1e-6 * std::max(1.0, std::abs(f));
  e.converged = t.allFinite() && (small(g, f) || (stalled && g.norm() < roundoff));
  return e;
}

// ---------------------------------------------------------------------------
// Least median of squares over random anchor subsets.

namespace detail {

inline double median_in_place(std::vector<double>& v) {
  const std::size_t n = v.size();
  auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace detail

/// Median over all anchors of (dbar_i - ||c - a_i||)^2.
inline double median_range_residual(const Point& candidate,
                                    std::span<const Point> anchors,
                                    const Eigen::VectorXd& dbar) {
  std::vector<double> r(anchors.size());
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const double e = dbar(static_cast<Eigen::Index>(i)) - (candidate - anchors[i]).norm();
    r[i] = e * e;
  }
  return detail::median_in_place(r);
}

/// LMdS given explicit subsets: LS on each subset, keep the candidate with
/// the smallest median residual. Degenerate subsets are skipped.
inline Estimate lmds_from_subsets(
    std::span<const Point> anchors, const Eigen::VectorXd& dbar,
    std::span<const std::vector<std::size_t>> subsets) {
  const LinearSystem full = build_linear_system(anchors, dbar);
  Estimate best;
  double best_median = std::numeric_limits<double>::infinity();
  int evaluated = 0;
  for (const auto& subset : subsets) {
    Estimate cand;
    try {
      cand = ls_estimate(full.select(subset));
    } catch (const DegenerateGeometry&) {
      continue;
    } catch (const InsufficientAnchors&) {
      continue;
    }
    ++evaluated;
    const double med = median_range_residual(cand.position, anchors, dbar);
    if (med < best_median) {
      best_median = med;
      best = cand;
    }
  }
  if (evaluated == 0)
    throw DegenerateGeometry("every LMdS subset was degenerate");
  best.iterations = evaluated;
  best.converged = best.position.allFinite();
  return best;
}

struct LmdsOptions {
  std::size_t n_subsets = 20;
  std::size_t subset_size = 4;
  int max_redraws = 16;
};

inline Estimate lmds_estimate(const MeasurementMatrix& m,
                              std::span<const Point> anchors,
                              const PathLossParams& params,
                              const LmdsOptions& opts, std::uint64_t seed) {
  detail::require_shape(m, anchors);
  if (opts.subset_size < 3) throw DomainError("LMdS subset size must be >= 3");
  if (opts.n_subsets < 1) throw DomainError("LMdS needs at least one subset");
  if (opts.subset_size > anchors.size())
    throw InsufficientAnchors("LMdS subset larger than the anchor set");
  const Eigen::VectorXd dbar = mean_distances(m, params);

  Rng rng = make_rng(seed);
  std::vector<std::size_t> pool(anchors.size());
  std::vector<std::vector<std::size_t>> subsets;
  for (std::size_t s = 0; s < opts.n_subsets; ++s) {
    for (int attempt = 0; attempt <= opts.max_redraws; ++attempt) {
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t k = 0; k < opts.subset_size; ++k) {
        std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
        std::swap(pool[k], pool[pick(rng)]);
      }
      std::vector<Point> sub;
      for (std::size_t k = 0; k < opts.subset_size; ++k) sub.push_back(anchors[pool[k]]);
      if (spans_plane(sub)) {
        subsets.emplace_back(pool.begin(),
                             pool.begin() + static_cast<std::ptrdiff_t>(opts.subset_size));
        break;
      }
    }
  }
  return lmds_from_subsets(anchors, dbar, subsets);
}

// ---------------------------------------------------------------------------
// Gradient descent with residual-rank pruning.

struct GradDescOptions {
  double step = 0.4;
  int max_iters = 200;
  double keep_fraction = 0.5;
};

namespace detail {

// Indices of the `keep` anchors with the smallest |power residual| at t,
// ties broken by index.
inline std::vector<std::size_t> smallest_residuals(const Eigen::VectorXd& r,
                                                   std::size_t keep) {
  std::vector<std::size_t> idx(static_cast<std::size_t>(r.size()));
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(r(static_cast<Eigen::Index>(a))) <
           std::abs(r(static_cast<Eigen::Index>(b)));
  });
  idx.resize(keep);
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace detail

/// Gradient descent on the ML cost of the mean powers over the kept anchors
///   C(t) = sum_{i in K(t)} (pbar_i - p0 + 10 n log10 ||t - a_i||)^2,
/// where K(t) holds the ceil(keep_fraction * N) anchors with the smallest
/// absolute residual at the current iterate. `trace`, if given, receives C
/// at every iterate including the last.
inline Estimate grad_desc_estimate(const MeasurementMatrix& m,
                                   std::span<const Point> anchors,
                                   const PathLossParams& params,
                                   const GradDescOptions& opts,
                                   const Point& init,
                                   std::vector<double>* trace = nullptr) {
  detail::require_shape(m, anchors);
  if (!(opts.step > 0.0)) throw DomainError("step must be positive");
  if (!(opts.keep_fraction > 0.0 && opts.keep_fraction <= 1.0))
    throw DomainError("keep_fraction must lie in (0, 1]");
  if (!init.allFinite()) throw DomainError("initial point must be finite");

  const std::size_t n = anchors.size();
  const std::size_t keep = std::min(
      n, std::max<std::size_t>(
             3, static_cast<std::size_t>(std::ceil(opts.keep_fraction * static_cast<double>(n) - 1e-12))));
  const Eigen::VectorXd pbar = m.row_means();
  const double slope = params.n * detail::kDbPerNeper;

  Point t = init;
  Eigen::VectorXd r(static_cast<Eigen::Index>(n));
  auto residuals = [&](const Point& at) {
    for (std::size_t i = 0; i < n; ++i) {
      const double d = std::max((at - anchors[i]).norm(), MlObjective::kMinRange);
      r(static_cast<Eigen::Index>(i)) =
          pbar(static_cast<Eigen::Index>(i)) - params.p0 + 10.0 * params.n * std::log10(d);
    }
  };

  Estimate e;
  bool diverged = false;
  bool settled = false;
  int it = 0;
  std::vector<std::size_t> kept;
  for (;; ++it) {
    residuals(t);
    kept = detail::smallest_residuals(r, keep);
    if (trace) {
      double c = 0.0;
      for (auto i : kept) c += r(static_cast<Eigen::Index>(i)) * r(static_cast<Eigen::Index>(i));
      trace->push_back(c);
    }
    if (it >= opts.max_iters || settled) break;
    Point g = Point::Zero();
    for (auto i : kept) {
      const Point diff = t - anchors[i];
      const double d2 = std::max(diff.squaredNorm(), MlObjective::kMinRange * MlObjective::kMinRange);
      g += (2.0 * r(static_cast<Eigen::Index>(i)) * slope / d2) * diff;
    }
    const Point move = opts.step * g;
    t -= move;
    if (!t.allFinite() || t.norm() > 1e6) {
      diverged = true;
      break;
    }
    if (move.norm() < 1e-12) settled = true;
  }
  e.position = t;
  e.iterations = it;
  e.converged = !diverged;
  std::vector<bool> in(n, false);
  for (auto i : kept) in[i] = true;
  for (std::size_t i = 0; i < n; ++i)
    if (!in[i]) e.eliminated.push_back(i);
  return e;
}

/// Centroid of the anchors; the Grad-Desc starting point.
inline Point anchor_centroid(std::span<const Point> anchors) {
  Point c = Point::Zero();
  for (const auto& a : anchors) c += a;
  return c / static_cast<double>(anchors.size());
}

}  // namespace secloc

#endif  // SECLOC_ESTIMATORS_HPP
