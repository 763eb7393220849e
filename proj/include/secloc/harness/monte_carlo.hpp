#ifndef SECLOC_HARNESS_MONTE_CARLO_HPP
#define SECLOC_HARNESS_MONTE_CARLO_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "secloc/attack_sim.hpp"
#include "secloc/crlb.hpp"
#include "secloc/errors.hpp"
#include "secloc/estimators.hpp"
#include "secloc/harness/config.hpp"
#include "secloc/l1_fit.hpp"
#include "secloc/random.hpp"
#include "secloc/topology_io.hpp"

namespace secloc::harness {

struct EstimatorOutcome {
  EstimatorId id{};
  bool ok = false;           // produced a converged, finite position
  double error = 0.0;        // ||t_hat - t||, metres (valid when ok)
  bool converged = false;
  std::size_t eliminated = 0;
  std::size_t true_positive = 0;   // eliminated and malicious
  std::size_t false_positive = 0;  // eliminated and honest
  std::string failure;             // exception text when the estimator threw
};

struct TrialResult {
  std::size_t trial = 0;
  std::size_t n_anchors = 0;
  std::size_t n_malicious = 0;
  std::vector<EstimatorOutcome> outcomes;  // config order
  std::optional<double> crlb;
};

/// Topology shared by every trial (malicious set filled in per trial).
inline Topology base_topology(const ExperimentConfig& c) {
  if (c.topology_mode == TopologyMode::file) {
    Topology t = load_topology(c.topology_file);
    if (c.target) t.target = *c.target;
    return t;
  }
  Topology t;
  t.target = c.target_or_centre();
  t.anchors = random_anchors(c.n_anchors, c.area, t.target,
                             derive_seed(c.topology_seed, 0, StreamTag::topology));
  return t;
}

inline PlacementConstraint placement_of(const ExperimentConfig& c, const Point& target) {
  switch (c.placement) {
    case PlacementConstraint::Kind::anywhere: return PlacementConstraint::anywhere();
    case PlacementConstraint::Kind::within_radius:
      return PlacementConstraint::within(c.placement_radius, target);
    case PlacementConstraint::Kind::beyond_radius:
      return PlacementConstraint::beyond(c.placement_radius, target);
  }
  return {};
}

/// The topology a given trial runs on.
inline Topology trial_topology(const ExperimentConfig& c, const Topology& base,
                               std::size_t trial) {
  Topology topo = base;
  const std::uint64_t master = c.master_seed;
  if (c.topology_mode == TopologyMode::random_per_trial)
    topo.anchors = random_anchors(c.n_anchors, c.area, topo.target,
                                  derive_seed(master, trial, StreamTag::topology));
  if (c.redraw_malicious || c.topology_mode != TopologyMode::file)
    topo.malicious = select_malicious(topo.anchors, c.malicious_fraction,
                                      placement_of(c, topo.target),
                                      derive_seed(master, trial, StreamTag::malicious));
  return topo;
}

inline std::optional<double> trial_crlb(const ExperimentConfig& c, const Topology& topo) {
  try {
    return crlb_for(topo, c.channel, c.attack_spec(topo.target), c.packets);
  } catch (const Error&) {
    return std::nullopt;
  }
}

/// Runs one estimator on a measurement matrix. Throws secloc::Error on
/// estimator failure.
inline Estimate run_estimator(EstimatorId id, const ExperimentConfig& c,
                              const Topology& topo, const MeasurementMatrix& m,
                              std::uint64_t trial_seed) {
  const auto& anchors = topo.anchors;
  switch (id) {
    case EstimatorId::ls: {
      const auto d = mean_distances(m, c.channel);
      return ls_estimate(build_linear_system(anchors, d));
    }
    case EstimatorId::wls:
      return wls_estimate(m, anchors, c.channel);
    case EstimatorId::swls:
      return swls_estimate(m, anchors, c.channel, c.zeta);
    case EstimatorId::ml:
      return ml_estimate(m, anchors, c.channel, topo.target);
    case EstimatorId::lmds:
      return lmds_estimate(m, anchors, c.channel, c.lmds,
                           derive_seed(trial_seed, 0, StreamTag::lmds));
    case EstimatorId::grad_desc:
      return grad_desc_estimate(m, anchors, c.channel, c.grad_desc, anchor_centroid(anchors));
    case EstimatorId::ln1: {
      const auto d = mean_distances(m, c.channel);
      return ln1_estimate(build_linear_system(anchors, d), c.admm);
    }
    case EstimatorId::ln1e: {
      const auto d = mean_distances(m, c.channel);
      return ln1e_estimate(build_linear_system(anchors, d), c.admm);
    }
  }
  throw ConfigError("unknown estimator");
}

/// One Monte-Carlo trial: draw the malicious set and the measurements from
/// streams derived from (master seed, trial index), then run every enabled
/// estimator on the same matrix. Estimator failures are recorded, not thrown.
inline TrialResult run_trial(const ExperimentConfig& c, const Topology& base,
                             std::size_t trial) {
  TrialResult out;
  out.trial = trial;
  const Topology topo = trial_topology(c, base, trial);
  out.n_anchors = topo.size();
  out.n_malicious = topo.malicious.size();
  const std::uint64_t trial_seed = derive_seed(c.master_seed, trial, StreamTag::generic);
  const MeasurementMatrix m =
      simulate_measurements(topo, c.channel, c.attack_spec(topo.target), c.packets,
                            derive_seed(c.master_seed, trial, StreamTag::measurements));
  for (EstimatorId id : c.enabled_estimators()) {
    EstimatorOutcome o;
    o.id = id;
    try {
      const Estimate e = run_estimator(id, c, topo, m, trial_seed);
      o.converged = e.converged;
      o.ok = e.converged && e.position.allFinite();
      o.error = (e.position - topo.target).norm();
      o.eliminated = e.eliminated.size();
      for (auto i : e.eliminated) (topo.is_malicious(i) ? o.true_positive : o.false_positive)++;
    } catch (const Error& err) {
      o.failure = err.what();
    }
    out.outcomes.push_back(std::move(o));
  }
  out.crlb = trial_crlb(c, topo);
  return out;
}

inline std::size_t resolve_threads(std::size_t requested) {
  if (requested > 0) return requested;
  return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

/// Evaluates fn(i) for i in [0, count) on up to `threads` workers and returns
/// the results in index order.
template <typename Result, typename Fn>
std::vector<Result> parallel_map(std::size_t count, std::size_t threads, Fn fn) {
  std::vector<Result> results(count);
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        results[i] = fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        next = count;
      }
    }
  };
  const std::size_t n = std::min(resolve_threads(threads), std::max<std::size_t>(count, 1));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n; ++t) pool.emplace_back(worker);
  }
  if (first_error) std::rethrow_exception(first_error);
  return results;
}

struct EstimatorSummary {
  std::string name;                 // estimator key, or "crlb"
  std::optional<double> rmse;       // absent when no trial succeeded
  std::optional<double> crlb;
  std::size_t trials_ok = 0;
  std::size_t trials_failed = 0;
  std::optional<double> mean_tp;
  std::optional<double> mean_fp;
  std::optional<double> recall;                 // sum TP / sum malicious
  std::optional<double> false_elimination_rate; // sum FP / sum honest
};

struct Summary {
  std::vector<EstimatorSummary> rows;  // enabled estimators, then "crlb"
  std::size_t trials = 0;

  const EstimatorSummary* find(std::string_view name) const {
    for (const auto& r : rows)
      if (r.name == name) return &r;
    return nullptr;
  }
};

/// Folds trial results in index order.
inline Summary summarize(const ExperimentConfig& c, const std::vector<TrialResult>& trials) {
  Summary s;
  s.trials = trials.size();

  double crlb_sq = 0.0;
  std::size_t crlb_n = 0;
  for (const auto& t : trials)
    if (t.crlb) {
      crlb_sq += *t.crlb * *t.crlb;
      ++crlb_n;
    }
  std::optional<double> crlb;
  if (crlb_n > 0) crlb = std::sqrt(crlb_sq / static_cast<double>(crlb_n));

  const auto ids = c.enabled_estimators();
  for (std::size_t k = 0; k < ids.size(); ++k) {
    EstimatorSummary row;
    row.name = std::string(estimator_key(ids[k]));
    row.crlb = crlb;
    double sq = 0.0, tp = 0.0, fp = 0.0, bad = 0.0, honest = 0.0;
    for (const auto& t : trials) {
      const auto& o = t.outcomes.at(k);
      if (!o.ok) {
        ++row.trials_failed;
        continue;
      }
      ++row.trials_ok;
      sq += o.error * o.error;
      tp += static_cast<double>(o.true_positive);
      fp += static_cast<double>(o.false_positive);
      bad += static_cast<double>(t.n_malicious);
      honest += static_cast<double>(t.n_anchors - t.n_malicious);
    }
    if (row.trials_ok > 0) {
      const double ok = static_cast<double>(row.trials_ok);
      row.rmse = std::sqrt(sq / ok);
      if (eliminates(ids[k])) {
        row.mean_tp = tp / ok;
        row.mean_fp = fp / ok;
        if (bad > 0.0) row.recall = tp / bad;
        if (honest > 0.0) row.false_elimination_rate = fp / honest;
      }
    }
    s.rows.push_back(std::move(row));
  }

  EstimatorSummary bound;
  bound.name = "crlb";
  bound.rmse = crlb;
  bound.crlb = crlb;
  bound.trials_ok = crlb_n;
  bound.trials_failed = trials.size() - crlb_n;
  s.rows.push_back(std::move(bound));
  return s;
}

inline std::vector<TrialResult> run_trials(const ExperimentConfig& c, std::size_t threads = 0) {
  c.validate();
  const Topology base = base_topology(c);
  return parallel_map<TrialResult>(c.trials, threads,
                                   [&](std::size_t i) { return run_trial(c, base, i); });
}

/// RMSE per enabled estimator over the successful trials, plus the CRLB row.
inline Summary run_monte_carlo(const ExperimentConfig& c, std::size_t threads = 0) {
  return summarize(c, run_trials(c, threads));
}

/// CRLB only (no estimators): RMS over trials of the per-trial bound.
inline std::optional<double> config_crlb(const ExperimentConfig& c) {
  c.validate();
  const Topology base = base_topology(c);
  double sq = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < c.trials; ++i) {
    if (auto b = trial_crlb(c, trial_topology(c, base, i))) {
      sq += *b * *b;
      ++n;
    }
  }
  if (n == 0) return std::nullopt;
  return std::sqrt(sq / static_cast<double>(n));
}

// ---------------------------------------------------------------------------
// Parameter sweeps.

enum class SweepAxis { sigma_att, packets, malicious_fraction, attack_distance };

inline std::string_view axis_name(SweepAxis a) {
  switch (a) {
    case SweepAxis::sigma_att: return "sigma_att";
    case SweepAxis::packets: return "packets";
    case SweepAxis::malicious_fraction: return "malicious_fraction";
    case SweepAxis::attack_distance: return "attack_distance";
  }
  return "?";
}

inline SweepAxis parse_axis(std::string_view s) {
  for (auto a : {SweepAxis::sigma_att, SweepAxis::packets, SweepAxis::malicious_fraction,
                 SweepAxis::attack_distance})
    if (axis_name(a) == s) return a;
  throw ConfigError("unknown sweep axis '" + std::string(s) + "'");
}

/// Copy of `c` with the axis set to `value`.
inline ExperimentConfig at_axis(const ExperimentConfig& c, SweepAxis axis, double value) {
  ExperimentConfig out = c;
  switch (axis) {
    case SweepAxis::sigma_att:
      if (c.attack != AttackKind::uncoordinated)
        throw ConfigError("sigma_att sweep needs an uncoordinated attack");
      out.sigma_att = value;
      break;
    case SweepAxis::packets:
      if (!(value >= 1.0) || value != std::floor(value))
        throw ConfigError("packets sweep values must be positive integers");
      out.packets = static_cast<std::size_t>(value);
      break;
    case SweepAxis::malicious_fraction:
      out.malicious_fraction = value;
      break;
    case SweepAxis::attack_distance: {
      if (c.attack != AttackKind::coordinated)
        throw ConfigError("attack_distance sweep needs a coordinated attack");
      const double s = value / std::numbers::sqrt2;
      out.t_att_offset = Point(s, s);
      break;
    }
  }
  out.validate();
  return out;
}

struct SweepPoint {
  std::optional<double> axis_value;  // absent for a single simulate run
  Summary summary;
};

inline std::vector<SweepPoint> sweep(const ExperimentConfig& c, SweepAxis axis,
                                     const std::vector<double>& values,
                                     std::size_t threads = 0) {
  std::vector<ExperimentConfig> configs;
  for (double v : values) configs.push_back(at_axis(c, axis, v));
  std::vector<SweepPoint> out;
  for (std::size_t k = 0; k < values.size(); ++k)
    out.push_back({values[k], run_monte_carlo(configs[k], threads)});
  return out;
}

}  // namespace secloc::harness

#endif  // SECLOC_HARNESS_MONTE_CARLO_HPP
