#include <gtest/gtest.h>

#include <algorithm>
#include <array>

#include <Eigen/Dense>

#include "secloc/attack_sim.hpp"
#include "secloc/estimators.hpp"
#include "secloc/random.hpp"

using namespace secloc;

namespace {

const PathLossParams kDefault{-10.0, 4.0, 2.0};

PathLossParams quiet() {
  PathLossParams p = kDefault;
  p.sigma = 0.0;
  return p;
}

Eigen::VectorXd true_ranges(const std::vector<Point>& anchors, const Point& t) {
  Eigen::VectorXd d(static_cast<Eigen::Index>(anchors.size()));
  for (std::size_t i = 0; i < anchors.size(); ++i)
    d(static_cast<Eigen::Index>(i)) = (anchors[i] - t).norm();
  return d;
}

// Weighted normal equations solved by Cramer's rule in long double; shares
// nothing with the QR path under test.
std::array<long double, 3> cramer_oracle(const LinearSystem& s, const Eigen::VectorXd& w) {
  long double M[3][3] = {}, v[3] = {};
  for (Eigen::Index i = 0; i < s.A.rows(); ++i)
    for (int r = 0; r < 3; ++r) {
      v[r] += static_cast<long double>(w(i)) * s.A(i, r) * s.b(i);
      for (int c = 0; c < 3; ++c) M[r][c] += static_cast<long double>(w(i)) * s.A(i, r) * s.A(i, c);
    }
  const auto det3 = [](long double m[3][3]) {
    return m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) -
           m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
           m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
  };
  const long double D = det3(M);
  std::array<long double, 3> u{};
  for (int k = 0; k < 3; ++k) {
    long double Mk[3][3];
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) Mk[r][c] = (c == k) ? v[r] : M[r][c];
    u[static_cast<std::size_t>(k)] = det3(Mk) / D;
  }
  return u;
}

struct Scene {
  Topology topo;
  MeasurementMatrix m;
};

Scene scene(const AttackSpec& attack, std::size_t packets, std::uint64_t seed,
            const PathLossParams& p = kDefault, double fraction = 0.28) {
  Scene s;
  s.topo.target = {50, 50};
  s.topo.anchors = random_anchors(29, 100, s.topo.target, derive_seed(seed, 0, StreamTag::topology));
  s.topo.malicious =
      select_malicious(s.topo.anchors, fraction, {}, derive_seed(seed, 0, StreamTag::malicious));
  s.m = simulate_measurements(s.topo, p, attack, packets, derive_seed(seed, 0, StreamTag::measurements));
  return s;
}

}  // namespace

TEST(LinearSystem, Rows) {
  const std::vector<Point> a = {{0, 0}, {10, 0}, {0, 10}};
  const auto s = build_linear_system(a, Eigen::Vector3d(5, 5, 5));
  EXPECT_EQ(s.A.row(0), Eigen::RowVector3d(0, 0, 1));
  EXPECT_EQ(s.b(0), 25.0);
  EXPECT_EQ(s.A.row(1), Eigen::RowVector3d(-20, 0, 1));
  EXPECT_EQ(s.b(1), -75.0);
  EXPECT_THROW(build_linear_system(std::span(a).first(2), Eigen::Vector2d(1, 1)),
               InsufficientAnchors);
  EXPECT_THROW(build_linear_system(a, Eigen::Vector2d(1, 1)), DomainError);
}

TEST(LinearSystem, ExactThreeAnchorSolve) {
  const std::vector<Point> a = {{0, 0}, {10, 0}, {0, 10}};
  const auto s = build_linear_system(a, true_ranges(a, {3, 4}));
  const Eigen::Vector3d u = s.A.fullPivLu().solve(s.b);
  EXPECT_NEAR(u(0), 3.0, 1e-12);
  EXPECT_NEAR(u(1), 4.0, 1e-12);
  EXPECT_NEAR(u(2), 25.0, 1e-12);
  const Estimate e = ls_estimate(s);
  EXPECT_NEAR(e.position.x(), 3.0, 1e-9);
  EXPECT_NEAR(e.position.y(), 4.0, 1e-9);
  EXPECT_NEAR(*e.auxiliary, 25.0, 1e-9);
  EXPECT_TRUE(e.converged);
}

TEST(LinearSystem, SelectRows) {
  const std::vector<Point> a = {{0, 0}, {10, 0}, {0, 10}, {7, 7}};
  const auto s = build_linear_system(a, Eigen::Vector4d(1, 2, 3, 4));
  const std::vector<std::size_t> idx = {3, 1};
  const auto sub = s.select(idx);
  EXPECT_EQ(sub.rows(), 2u);
  EXPECT_EQ(sub.A.row(0), s.A.row(3));
  EXPECT_EQ(sub.b(1), s.b(1));
}

TEST(LeastSquares, ExactWithoutNoise) {
  const auto s = scene(AttackSpec::none(), 5, 3, quiet(), 0.0);
  const auto sys = build_linear_system(s.topo.anchors, mean_distances(s.m, quiet()));
  EXPECT_LT((ls_estimate(sys).position - s.topo.target).norm(), 1e-9);
  EXPECT_LT((wls_estimate(s.m, s.topo.anchors, quiet()).position - s.topo.target).norm(), 1e-9);
}

TEST(LeastSquares, CollinearIsDegenerate) {
  const std::vector<Point> a = {{0, 0}, {1, 1}, {2, 2}, {7, 7}};
  const auto sys = build_linear_system(a, Eigen::Vector4d(1, 2, 3, 4));
  EXPECT_THROW(ls_estimate(sys), DegenerateGeometry);
  // Nearly collinear: third coordinate off the line by 1e-9 m.
  const std::vector<Point> b = {{0, 0}, {10, 0}, {20, 1e-9}, {30, 0}};
  EXPECT_THROW(ls_estimate(build_linear_system(b, Eigen::Vector4d(1, 2, 3, 4))),
               DegenerateGeometry);
}

TEST(LeastSquares, MatchesCramerOracle) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> c(0, 100), noise(-3, 3), wdist(0.1, 5);
  for (int k = 0; k < 50; ++k) {
    std::vector<Point> a;
    const std::size_t n = 4 + static_cast<std::size_t>(k % 10);
    for (std::size_t i = 0; i < n; ++i) a.emplace_back(c(rng), c(rng));
    const Point t(c(rng), c(rng));
    Eigen::VectorXd d = true_ranges(a, t);
    for (Eigen::Index i = 0; i < d.size(); ++i) d(i) = std::abs(d(i) + noise(rng));
    const auto sys = build_linear_system(a, d);
    const auto ones = Eigen::VectorXd::Ones(d.size());
    const auto u = cramer_oracle(sys, ones);
    const Estimate e = ls_estimate(sys);
    EXPECT_NEAR(e.position.x(), static_cast<double>(u[0]), 1e-9);
    EXPECT_NEAR(e.position.y(), static_cast<double>(u[1]), 1e-9);
    EXPECT_NEAR(*e.auxiliary, static_cast<double>(u[2]), 1e-9 * std::max(1.0, std::abs(*e.auxiliary)));

    Eigen::VectorXd w(d.size());
    for (auto& x : w) x = wdist(rng);
    const auto uw = cramer_oracle(sys, w);
    const Eigen::Vector3d got = solve_weighted(sys, w);
    EXPECT_NEAR(got(0), static_cast<double>(uw[0]), 1e-9);
    EXPECT_NEAR(got(1), static_cast<double>(uw[1]), 1e-9);
  }
}

TEST(WeightedLeastSquares, EqualWeightsGiveLs) {
  const auto s = scene(AttackSpec::uncoordinated(8), 10, 4);
  const auto sys = build_linear_system(s.topo.anchors, mean_distances(s.m, kDefault));
  const auto ls = ls_estimate(sys);
  const Eigen::Vector3d w3 = solve_weighted(sys, Eigen::VectorXd::Constant(29, 3.7));
  EXPECT_LT((w3.head<2>() - ls.position).norm(), 1e-12 * 100);
  // sigma = 0 falls back to uniform weights.
  const auto dbar = mean_distances(s.m, kDefault);
  EXPECT_LT((wls_estimate(sys, dbar, quiet()).position - ls.position).norm(), 1e-9);
}

TEST(WeightedLeastSquares, WeightsFallWithDistance) {
  const Eigen::Vector4d d(1, 5, 20, 80);
  const Eigen::VectorXd w = detail::wls_weights(kDefault, d);
  for (Eigen::Index i = 1; i < 4; ++i) EXPECT_LT(w(i), w(i - 1));
  EXPECT_DOUBLE_EQ(w(1), 1.0 / distance_sq_variance(kDefault, 5.0));
  EXPECT_THROW(solve_weighted(build_linear_system(std::vector<Point>{{0, 0}, {1, 0}, {0, 1}},
                                                  Eigen::Vector3d(1, 1, 1)),
                              Eigen::Vector3d(1, -1, 1)),
               DomainError);
}

TEST(SecureWls, NoAttackKeepsEveryone) {
  const auto s = scene(AttackSpec::none(), 10000, 5, kDefault, 0.0);
  const auto screen = swls_screen(s.m, kDefault, 1.5);
  EXPECT_TRUE(screen.eliminated.empty());
  for (auto v : screen.sigma_hat) EXPECT_NEAR(v, 2.0, 0.1);
  // Nothing eliminated: identical to WLS.
  const auto a = swls_estimate(s.m, s.topo.anchors, kDefault, 1.5);
  const auto b = wls_estimate(s.m, s.topo.anchors, kDefault);
  EXPECT_EQ(a.position, b.position);
}

TEST(SecureWls, LargePEliminatesMalicious) {
  const auto s = scene(AttackSpec::uncoordinated(8), 10000, 6);
  const auto screen = swls_screen(s.m, kDefault, 1.5);
  EXPECT_EQ(screen.eliminated, s.topo.malicious);
  // Oracle: the noise level an attacked row actually carries.
  const double eff = std::sqrt(4.0 + 64.0);
  for (auto i : s.topo.malicious)
    EXPECT_NEAR(screen.sigma_hat(static_cast<Eigen::Index>(i)), eff, 0.1 * eff);
  const auto e = swls_estimate(s.m, s.topo.anchors, kDefault, 1.5);
  EXPECT_EQ(e.eliminated, s.topo.malicious);
  EXPECT_LT((e.position - s.topo.target).norm(), 0.5);
}

TEST(SecureWls, EliminationGrowsWithAttackNoise) {
  double prev = -1.0;
  for (double sa : {0.0, 2.0, 4.0, 6.0, 8.0}) {
    double total = 0.0;
    for (std::uint64_t k = 0; k < 100; ++k) {
      const auto s = scene(AttackSpec::uncoordinated(sa), 10000, 100 + k);
      const auto screen = swls_screen(s.m, kDefault, 1.5);
      for (auto i : screen.eliminated) total += s.topo.is_malicious(i) ? 1.0 : 0.0;
    }
    EXPECT_GE(total / 100.0, prev) << sa;
    prev = total / 100.0;
  }
  EXPECT_NEAR(prev, 8.0, 1e-9);
}

TEST(SecureWls, Errors) {
  const auto s = scene(AttackSpec::uncoordinated(8), 1, 7);
  EXPECT_THROW(swls_screen(s.m, kDefault, 1.5), DomainError);
  const auto t = scene(AttackSpec::uncoordinated(8), 50, 7);
  EXPECT_THROW(swls_screen(t.m, kDefault, 0.0), DomainError);
  // zeta so small that every honest anchor fails too.
  EXPECT_THROW(swls_estimate(t.m, t.topo.anchors, kDefault, 0.1), InsufficientSurvivors);
}

TEST(SecureWls, ZeroNoiseKeepsAll) {
  const auto s = scene(AttackSpec::coordinated({62, 62}), 10, 8, quiet());
  PathLossParams p = kDefault;  // declared sigma 2, measured spread 0
  const auto screen = swls_screen(s.m, p, 1.5);
  EXPECT_TRUE(screen.eliminated.empty());
}

TEST(MaximumLikelihood, GradientMatchesFiniteDifference) {
  const auto s = scene(AttackSpec::uncoordinated(8), 10, 9);
  const MlObjective f(s.m, s.topo.anchors, kDefault);
  for (const Point& t : {Point(50, 50), Point(20, 70), Point(81.5, 3.25)}) {
    const Point g = f.gradient(t);
    for (int k = 0; k < 2; ++k) {
      const double h = 1e-5;
      Point up = t, dn = t;
      up(k) += h;
      dn(k) -= h;
      const double fd = (f.value(up) - f.value(dn)) / (2 * h);
      EXPECT_NEAR(g(k), fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
  }
  EXPECT_TRUE(std::isinf(f.value(s.topo.anchors[0])));
}

TEST(MaximumLikelihood, NoiseFreeStaysAtTruth) {
  const auto s = scene(AttackSpec::none(), 4, 10, quiet(), 0.0);
  const auto e = ml_estimate(s.m, s.topo.anchors, quiet(), s.topo.target);
  EXPECT_TRUE(e.converged);
  EXPECT_LT((e.position - s.topo.target).norm(), 1e-9);
  EXPECT_NEAR(MlObjective(s.m, s.topo.anchors, quiet()).value(e.position), 0.0, 1e-18);
}

TEST(MaximumLikelihood, DescendsFromStart) {
  for (std::uint64_t k = 0; k < 30; ++k) {
    const auto s = scene(AttackSpec::uncoordinated(8), 10, 200 + k);
    const MlObjective f(s.m, s.topo.anchors, kDefault);
    for (const Point& init : {s.topo.target, Point(30, 60)}) {
      const auto e = ml_estimate(s.m, s.topo.anchors, kDefault, init);
      EXPECT_LE(f.value(e.position), f.value(init));
      EXPECT_TRUE(e.converged) << k;
    }
  }
  // Starting exactly on an anchor is nudged off rather than failing.
  const auto s = scene(AttackSpec::none(), 10, 11, kDefault, 0.0);
  EXPECT_TRUE(ml_estimate(s.m, s.topo.anchors, kDefault, s.topo.anchors[3]).position.allFinite());
}

TEST(LeastMedian, MedianHelper) {
  std::vector<double> odd = {5, 1, 3};
  EXPECT_EQ(detail::median_in_place(odd), 3.0);
  std::vector<double> even = {4, 1, 3, 2};
  EXPECT_EQ(detail::median_in_place(even), 2.5);
}

TEST(LeastMedian, NoiseFreeRecoversTruth) {
  const auto s = scene(AttackSpec::none(), 3, 12, quiet(), 0.0);
  const auto e = lmds_estimate(s.m, s.topo.anchors, quiet(), {}, 5);
  EXPECT_LT((e.position - s.topo.target).norm(), 1e-9);
  EXPECT_NEAR(median_range_residual(e.position, s.topo.anchors, mean_distances(s.m, quiet())),
              0.0, 1e-12);
  EXPECT_EQ(e.iterations, 20);
}

TEST(LeastMedian, PlantedSubsetWins) {
  // Seven anchors; the two corrupted ranges belong to anchors 0 and 1.
  const std::vector<Point> a = {{0, 0}, {40, 0}, {0, 40}, {40, 40}, {20, -10}, {-10, 20}, {35, 15}};
  const Point t(12, 17);
  Eigen::VectorXd d = true_ranges(a, t);
  d(0) += 15.0;
  d(1) -= 9.0;
  const std::vector<std::vector<std::size_t>> subsets = {{0, 1, 2, 3}, {0, 4, 5, 6}, {2, 3, 4, 5}};
  const auto e = lmds_from_subsets(a, d, subsets);
  EXPECT_LT((e.position - t).norm(), 1e-9);
  EXPECT_EQ(e.iterations, 3);
  // Only degenerate subsets: reported as such.
  const std::vector<Point> line = {{0, 0}, {1, 0}, {2, 0}, {0, 5}};
  const std::vector<std::vector<std::size_t>> bad = {{0, 1, 2}};
  EXPECT_THROW(lmds_from_subsets(line, Eigen::Vector4d(1, 1, 1, 1), bad), DegenerateGeometry);
}

TEST(LeastMedian, Options) {
  const auto s = scene(AttackSpec::none(), 3, 12);
  LmdsOptions o;
  o.subset_size = 2;
  EXPECT_THROW(lmds_estimate(s.m, s.topo.anchors, kDefault, o, 1), DomainError);
  o.subset_size = 30;
  EXPECT_THROW(lmds_estimate(s.m, s.topo.anchors, kDefault, o, 1), InsufficientAnchors);
  const auto a = lmds_estimate(s.m, s.topo.anchors, kDefault, {}, 44);
  const auto b = lmds_estimate(s.m, s.topo.anchors, kDefault, {}, 44);
  EXPECT_EQ(a.position, b.position);
}

TEST(GradientDescent, StaysAtTruthWithoutNoise) {
  const auto s = scene(AttackSpec::none(), 3, 13, quiet(), 0.0);
  GradDescOptions o;
  o.keep_fraction = 1.0;
  const auto e = grad_desc_estimate(s.m, s.topo.anchors, quiet(), o, s.topo.target);
  EXPECT_LT((e.position - s.topo.target).norm(), 1e-9);
  EXPECT_TRUE(e.eliminated.empty());
  EXPECT_TRUE(e.converged);
}

TEST(GradientDescent, CostTraceDecreasesAtSmallStep) {
  const auto s = scene(AttackSpec::none(), 10, 14, kDefault, 0.0);
  GradDescOptions o;
  o.step = 0.05;
  o.keep_fraction = 1.0;
  std::vector<double> trace;
  const auto e = grad_desc_estimate(s.m, s.topo.anchors, kDefault, o,
                                    anchor_centroid(s.topo.anchors), &trace);
  ASSERT_EQ(trace.size(), static_cast<std::size_t>(e.iterations) + 1);
  for (std::size_t k = 1; k < trace.size(); ++k) EXPECT_LE(trace[k], trace[k - 1] + 1e-12) << k;
  EXPECT_LT(trace.back(), trace.front());
}

TEST(GradientDescent, KeepsHalfAndFlagsDivergence) {
  const auto s = scene(AttackSpec::uncoordinated(8), 10, 15);
  const auto e = grad_desc_estimate(s.m, s.topo.anchors, kDefault, {}, anchor_centroid(s.topo.anchors));
  EXPECT_EQ(e.eliminated.size(), 29u - 15u);
  EXPECT_TRUE(std::is_sorted(e.eliminated.begin(), e.eliminated.end()));
  GradDescOptions wild;
  wild.step = 1e9;
  EXPECT_FALSE(grad_desc_estimate(s.m, s.topo.anchors, kDefault, wild, {10, 10}).converged);
  wild.step = 0.4;
  wild.keep_fraction = 0.0;
  EXPECT_THROW(grad_desc_estimate(s.m, s.topo.anchors, kDefault, wild, {10, 10}), DomainError);
}

TEST(Estimators, TranslationEquivariance) {
  const auto s = scene(AttackSpec::uncoordinated(8), 10, 16);
  const Point v(-123.25, 47.5);
  std::vector<Point> moved = s.topo.anchors;
  for (auto& a : moved) a += v;
  const auto& A = s.topo.anchors;
  const auto check = [&](const Estimate& e0, const Estimate& e1, const char* name) {
    EXPECT_LT((e1.position - (e0.position + v)).norm(), 1e-6) << name;
  };
  check(wls_estimate(s.m, A, kDefault), wls_estimate(s.m, moved, kDefault), "wls");
  check(swls_estimate(s.m, A, kDefault, 1.5), swls_estimate(s.m, moved, kDefault, 1.5), "swls");
  const auto dbar = mean_distances(s.m, kDefault);
  check(ls_estimate(build_linear_system(A, dbar)), ls_estimate(build_linear_system(moved, dbar)),
        "ls");
  check(ml_estimate(s.m, A, kDefault, s.topo.target),
        ml_estimate(s.m, moved, kDefault, s.topo.target + v), "ml");
  check(lmds_estimate(s.m, A, kDefault, {}, 3), lmds_estimate(s.m, moved, kDefault, {}, 3), "lmds");
  check(grad_desc_estimate(s.m, A, kDefault, {}, anchor_centroid(A)),
        grad_desc_estimate(s.m, moved, kDefault, {}, anchor_centroid(moved)), "grad_desc");
}

TEST(Estimators, ShapeChecks) {
  const auto s = scene(AttackSpec::none(), 5, 17);
  const std::vector<Point> few(s.topo.anchors.begin(), s.topo.anchors.begin() + 5);
  EXPECT_THROW(wls_estimate(s.m, few, kDefault), DomainError);
  EXPECT_THROW(ml_estimate(s.m, s.topo.anchors, kDefault, Point(NAN, 0)), DomainError);
}
