#ifndef SECLOC_L1_FIT_HPP
#define SECLOC_L1_FIT_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "secloc/errors.hpp"
#include "secloc/estimators.hpp"

namespace secloc {

/// Plane z = alpha x + beta y + gamma over the rows of a LinearSystem.
/// For a consistent system alpha = tx, beta = ty, gamma = tx^2 + ty^2.
struct PlaneCoeffs {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;

  Eigen::Vector3d vector() const { return {alpha, beta, gamma}; }
  static PlaneCoeffs from(const Eigen::Vector3d& u) { return {u(0), u(1), u(2)}; }
};

struct AdmmParams {
  double rho = 0.2;
  double conv_tol = 1e-6;
  int max_iters = 5000;

  void validate() const {
    if (!(rho > 0.0)) throw ConfigError("ADMM rho must be positive");
    if (!(conv_tol > 0.0)) throw ConfigError("ADMM tolerance must be positive");
    if (max_iters < 1) throw ConfigError("ADMM max_iters must be >= 1");
  }
};

struct AdmmResult {
  PlaneCoeffs plane;
  int iterations = 0;
  bool converged = false;         // ADMM stopping rule met
  bool optimal = false;           // returned plane is a certified l1 vertex
  double objective = 0.0;         // ||A u - b||_1 at the returned u
  double primal_residual = 0.0;   // ||A u - z - b||_2 at the last iterate
};

inline double soft_threshold(double x, double threshold) {
  return std::copysign(std::max(std::abs(x) - threshold, 0.0), x);
}

inline Eigen::VectorXd soft_threshold(const Eigen::VectorXd& x, double threshold) {
  return x.unaryExpr([threshold](double v) { return soft_threshold(v, threshold); });
}

inline double l1_objective(const LinearSystem& sys, const Eigen::Vector3d& u) {
  return (sys.A * u - sys.b).lpNorm<1>();
}

namespace detail {

struct L1Vertex {
  Eigen::Vector3d u;
  std::array<Eigen::Index, 3> basis;
  double objective;
};

inline constexpr std::size_t kPolishPool = 12;

// Some minimiser of ||A u - b||_1 interpolates three rows. Starting from u,
// try every triple among the rows with the smallest residuals, move to the
// best vertex, and repeat until nothing improves. The result may be worse
// than `start`; it is only a vertex to descend from.
inline std::optional<L1Vertex> polish_vertex(const LinearSystem& sys, const Eigen::Vector3d& start) {
  const auto n = static_cast<Eigen::Index>(sys.rows());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::optional<L1Vertex> best;
  Eigen::Vector3d u = start;
  for (int round = 0; round < 32; ++round) {
    const Eigen::VectorXd r = (sys.A * u - sys.b).cwiseAbs();
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Eigen::Index a, Eigen::Index b) { return r(a) < r(b); });
    const std::size_t m = std::min<std::size_t>(order.size(), kPolishPool);
    bool improved = false;
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = i + 1; j < m; ++j)
        for (std::size_t k = j + 1; k < m; ++k) {
          const std::array<Eigen::Index, 3> rows{order[i], order[j], order[k]};
          Eigen::Matrix3d M;
          Eigen::Vector3d rhs;
          for (int q = 0; q < 3; ++q) {
            M.row(q) = sys.A.row(rows[static_cast<std::size_t>(q)]);
            rhs(q) = sys.b(rows[static_cast<std::size_t>(q)]);
          }
          const Eigen::FullPivLU<Eigen::Matrix3d> lu(M);
          if (!lu.isInvertible()) continue;
          const Eigen::Vector3d v = lu.solve(rhs);
          const double obj = l1_objective(sys, v);
          if (!best || obj < best->objective - 1e-13 * (1.0 + best->objective)) {
            best = L1Vertex{v, rows, obj};
            improved = true;
          }
        }
    if (!improved) break;
    u = best->u;
  }
  return best;
}

inline bool is_zero_row(const LinearSystem& sys, const Eigen::VectorXd& r, Eigen::Index i) {
  return std::abs(r(i)) <= 1e-9 * (1.0 + std::abs(sys.b(i)));
}

struct DescentRay {
  Eigen::Vector3d y;
  Eigen::Index keep0, keep1;  // rows that stay interpolated along y
};

// Optimality of a vertex: the one-sided derivative of the l1 objective,
// g.y + sum over zero-residual rows of |A_i y|, must be non-negative in every
// direction y, with g the signed sum of the other rows. It is piecewise linear
// and homogeneous, so checking the rays A_i x A_j of the zero rows suffices.
// Returns a ray of steepest decrease among those, if any descends.
inline std::optional<DescentRay> descent_ray(const LinearSystem& sys, const L1Vertex& v) {
  const Eigen::VectorXd r = sys.A * v.u - sys.b;
  Eigen::Vector3d g = Eigen::Vector3d::Zero();
  std::vector<Eigen::Index> zero;
  for (Eigen::Index i = 0; i < r.size(); ++i) {
    const bool in_basis = std::find(v.basis.begin(), v.basis.end(), i) != v.basis.end();
    if (in_basis || is_zero_row(sys, r, i))
      zero.push_back(i);
    else
      g += (r(i) > 0 ? 1.0 : -1.0) * sys.A.row(i).transpose();
  }
  std::optional<DescentRay> best;
  double best_slope = 0.0;
  for (std::size_t i = 0; i < zero.size(); ++i)
    for (std::size_t j = i + 1; j < zero.size(); ++j) {
      Eigen::Vector3d y = sys.A.row(zero[i]).transpose().cross(sys.A.row(zero[j]).transpose());
      const double len = y.norm();
      if (!(len > 0)) continue;
      y /= len;
      double kink = 0.0, scale = std::abs(g.dot(y));
      for (auto k : zero) {
        kink += std::abs(sys.A.row(k).dot(y));
        scale += sys.A.row(k).norm();
      }
      for (double sign : {1.0, -1.0}) {
        const double slope = (kink + sign * g.dot(y)) / scale;
        if (slope < -1e-9 && slope < best_slope) {
          best_slope = slope;
          best = DescentRay{sign * y, zero[i], zero[j]};
        }
      }
    }
  return best;
}

inline bool certify_vertex(const LinearSystem& sys, const L1Vertex& v) {
  return !descent_ray(sys, v).has_value();
}

// Walks from vertex to vertex along descending edges, each time to the exact
// minimiser on the edge (a weighted median of the residual breakpoints). The
// objective falls strictly at every step, so no vertex repeats.
inline L1Vertex descend_vertex(const LinearSystem& sys, L1Vertex v, bool& optimal) {
  optimal = false;
  const int cap = 10 * static_cast<int>(sys.rows()) + 100;
  for (int step = 0; step < cap; ++step) {
    const auto ray = descent_ray(sys, v);
    if (!ray) {
      optimal = true;
      return v;
    }
    const Eigen::VectorXd r = sys.A * v.u - sys.b;
    const Eigen::VectorXd c = sys.A * ray->y;
    double slope = 0.0;
    std::vector<std::pair<double, Eigen::Index>> breaks;
    for (Eigen::Index i = 0; i < r.size(); ++i) {
      if (i == ray->keep0 || i == ray->keep1) continue;
      if (is_zero_row(sys, r, i)) {
        slope += std::abs(c(i));  // |s c_i| for every s > 0
        continue;
      }
      slope += (r(i) > 0 ? 1.0 : -1.0) * c(i);
      if (r(i) * c(i) < 0.0) breaks.emplace_back(-r(i) / c(i), i);
    }
    std::sort(breaks.begin(), breaks.end());
    std::optional<Eigen::Index> enter;
    for (const auto& [s, i] : breaks) {
      slope += 2.0 * std::abs(c(i));
      if (slope >= 0.0) {
        enter = i;
        break;
      }
    }
    if (!enter) return v;
    const std::array<Eigen::Index, 3> rows{ray->keep0, ray->keep1, *enter};
    Eigen::Matrix3d M;
    Eigen::Vector3d rhs;
    for (int q = 0; q < 3; ++q) {
      M.row(q) = sys.A.row(rows[static_cast<std::size_t>(q)]);
      rhs(q) = sys.b(rows[static_cast<std::size_t>(q)]);
    }
    const Eigen::FullPivLU<Eigen::Matrix3d> lu(M);
    if (!lu.isInvertible()) return v;
    const Eigen::Vector3d u = lu.solve(rhs);
    const double obj = l1_objective(sys, u);
    if (!(obj < v.objective)) return v;  // round-off floor
    v = L1Vertex{u, rows, obj};
  }
  return v;
}

}  // namespace detail

/// min ||A u - b||_1 via ADMM on the split A u - z = b:
///   u <- (A^T A)^-1 A^T (b + z - y / rho)
///   z <- S_{1/rho}(A u - b + y / rho)
///   y <- y + rho (A u - z - b)
/// starting from u = z = y = 0. The run counts as converged once ||z||_1
/// changes by at most conv_tol between iterations while the primal residual
/// ||A u - z - b||_2 is within conv_tol * (1 + ||b||_2); a flat ||z||_1
/// alone also happens while z is still pinned at zero. On hitting max_iters
/// the iterate with the lowest objective is kept.
///
/// The ADMM point is then snapped to the l1 vertex it approaches (see
/// detail::polish_vertex) when that lowers the objective, and walked along
/// descending edges until the vertex is certified optimal.
inline AdmmResult admm_l1_plane(const LinearSystem& sys, const AdmmParams& params) {
  params.validate();
  if (sys.rows() < 3) throw InsufficientAnchors("plane fit needs at least 3 rows");
  // Same conditioning guard as the least-squares estimators.
  (void)solve_weighted(sys, Eigen::VectorXd::Ones(static_cast<Eigen::Index>(sys.rows())));

  const Eigen::Matrix3d gram = sys.A.transpose() * sys.A;
  const Eigen::LDLT<Eigen::Matrix3d> gram_solver(gram);
  if (gram_solver.info() != Eigen::Success)
    throw DegenerateGeometry("A^T A is not invertible");

  const auto n = static_cast<Eigen::Index>(sys.rows());
  const double rho = params.rho;
  const double primal_tol = params.conv_tol * (1.0 + sys.b.norm());
  Eigen::Vector3d u = Eigen::Vector3d::Zero();
  Eigen::VectorXd z = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd Au(n);

  AdmmResult out;
  Eigen::Vector3d best_u = u;
  double best_obj = std::numeric_limits<double>::infinity();
  double z_norm = 0.0;
  int k = 0;
  for (; k < params.max_iters; ++k) {
    u = gram_solver.solve(sys.A.transpose() * (sys.b + z - y / rho));
    Au.noalias() = sys.A * u;
    z = soft_threshold(Au - sys.b + y / rho, 1.0 / rho);
    y += rho * (Au - z - sys.b);

    const double obj = (Au - sys.b).lpNorm<1>();
    if (obj < best_obj) {
      best_obj = obj;
      best_u = u;
    }
    const double z_next = z.lpNorm<1>();
    const bool settled = std::abs(z_next - z_norm) <= params.conv_tol &&
                         (Au - z - sys.b).norm() <= primal_tol;
    z_norm = z_next;
    if (settled) {
      out.converged = true;
      ++k;
      break;
    }
  }
  out.iterations = k;
  out.primal_residual = (Au - z - sys.b).norm();
  Eigen::Vector3d sol = out.converged ? u : best_u;
  out.objective = l1_objective(sys, sol);

  if (const auto v = detail::polish_vertex(sys, sol)) {
    bool optimal = false;
    const detail::L1Vertex w = detail::descend_vertex(sys, *v, optimal);
    if (w.objective <= out.objective) {
      sol = w.u;
      out.objective = w.objective;
      out.optimal = optimal;
    }
  }
  out.plane = PlaneCoeffs::from(sol);
  return out;
}

/// Vertical distance |b_i - A_i u| of data point i from the plane.
inline double point_plane_residual(const LinearSystem& sys, std::size_t i,
                                   const PlaneCoeffs& plane) {
  const auto r = static_cast<Eigen::Index>(i);
  return std::abs(sys.b(r) - sys.A.row(r).dot(plane.vector()));
}

inline std::vector<double> plane_residuals(const LinearSystem& sys,
                                           const PlaneCoeffs& plane) {
  std::vector<double> out(sys.rows());
  for (std::size_t i = 0; i < sys.rows(); ++i) out[i] = point_plane_residual(sys, i, plane);
  return out;
}

struct KMeans1dResult {
  std::vector<bool> far;   // true = member of the larger-centroid cluster
  double near_centroid = 0.0;
  double far_centroid = 0.0;
  bool degenerate = false; // values (nearly) identical; everything is near
};

/// Two-cluster K-means on scalars, solved exactly: in one dimension an
/// optimal partition is a cut of the sorted values, so every cut is scored by
/// its within-cluster sum of squares and the best one wins (ties favour the
/// larger near cluster). The result is also a fixed point of Lloyd's
/// iteration. Values whose spread max - min is at most `spread_tol` form a
/// single cluster and are all reported as near with degenerate = true.
inline KMeans1dResult kmeans_1d(const std::vector<double>& values,
                                double spread_tol = 0.0) {
  if (values.size() < 2) throw DomainError("k-means needs at least 2 values");
  for (double v : values)
    if (!std::isfinite(v)) throw DomainError("k-means values must be finite");
  const std::size_t n = values.size();
  const auto [lo_it, hi_it] = std::minmax_element(values.begin(), values.end());
  KMeans1dResult out;
  out.far.assign(n, false);
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= static_cast<double>(n);
  if (*hi_it - *lo_it <= spread_tol) {
    out.near_centroid = out.far_centroid = mean;
    out.degenerate = true;
    return out;
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  // Prefix sums of the centred values keep the cancellation small.
  std::vector<double> s1(n + 1, 0.0), s2(n + 1, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double c = values[order[k]] - mean;
    s1[k + 1] = s1[k] + c;
    s2[k + 1] = s2[k] + c * c;
  }
  const auto sse = [&](std::size_t lo, std::size_t hi) {
    const double m = static_cast<double>(hi - lo);
    const double a = s1[hi] - s1[lo];
    return (s2[hi] - s2[lo]) - a * a / m;
  };
  std::size_t cut = 0;
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t c = 1; c < n; ++c) {
    if (values[order[c - 1]] == values[order[c]]) continue;  // equal values stay together
    const double cost = sse(0, c) + sse(c, n);
    if (cost <= best) {
      best = cost;
      cut = c;
    }
  }
  for (std::size_t k = cut; k < n; ++k) out.far[order[k]] = true;
  out.near_centroid = mean + s1[cut] / static_cast<double>(cut);
  out.far_centroid = mean + (s1[n] - s1[cut]) / static_cast<double>(n - cut);
  return out;
}

/// Relative spread below which LN-1E treats plane residuals as all zero.
inline constexpr double kResidualSpreadTol = 1e-8;

/// LN-1: position from the l1 plane fit over every anchor.
inline Estimate ln1_estimate(const LinearSystem& sys, const AdmmParams& params) {
  const AdmmResult fit = admm_l1_plane(sys, params);
  Estimate e;
  e.position = Point(fit.plane.alpha, fit.plane.beta);
  e.auxiliary = fit.plane.gamma;
  e.iterations = fit.iterations;
  e.converged = (fit.converged || fit.optimal) && e.position.allFinite();
  return e;
}

/// LN-1E: LN-1, split the plane residuals into two clusters, refit on the
/// cluster nearer the plane. Estimate.eliminated is the far cluster.
inline Estimate ln1e_estimate(const LinearSystem& sys, const AdmmParams& params) {
  const AdmmResult first = admm_l1_plane(sys, params);
  const std::vector<double> resid = plane_residuals(sys, first.plane);
  const double scale = 1.0 + sys.b.lpNorm<Eigen::Infinity>();
  const KMeans1dResult groups = kmeans_1d(resid, kResidualSpreadTol * scale);

  std::vector<std::size_t> near, far;
  for (std::size_t i = 0; i < resid.size(); ++i)
    (groups.far[i] ? far : near).push_back(i);

  Estimate e;
  if (far.empty()) {
    e.position = Point(first.plane.alpha, first.plane.beta);
    e.auxiliary = first.plane.gamma;
    e.iterations = first.iterations;
    e.converged = (first.converged || first.optimal) && e.position.allFinite();
    return e;
  }
  if (near.size() < 3)
    throw InsufficientSurvivors("LN-1E near-plane cluster has " +
                                std::to_string(near.size()) + " anchors, need 3");
  const AdmmResult refit = admm_l1_plane(sys.select(near), params);
  e.position = Point(refit.plane.alpha, refit.plane.beta);
  e.auxiliary = refit.plane.gamma;
  e.eliminated = std::move(far);
  e.iterations = first.iterations + refit.iterations;
  e.converged = (first.converged || first.optimal) && (refit.converged || refit.optimal) &&
                e.position.allFinite();
  return e;
}

}  // namespace secloc

#endif  // SECLOC_L1_FIT_HPP
