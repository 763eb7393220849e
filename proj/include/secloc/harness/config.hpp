#ifndef SECLOC_HARNESS_CONFIG_HPP
#define SECLOC_HARNESS_CONFIG_HPP

// Experiment configuration: a flat `key = value` text file with dotted
// section keys. '#' starts a comment. A `profile = desk|paper` line selects a
// built-in base that the other keys then override, wherever it appears.

#include <algorithm>
#include <array>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "secloc/attack_sim.hpp"
#include "secloc/channel_model.hpp"
#include "secloc/errors.hpp"
#include "secloc/estimators.hpp"
#include "secloc/l1_fit.hpp"
#include "secloc/topology_io.hpp"

namespace secloc::harness {

enum class EstimatorId { ls, wls, swls, ml, lmds, grad_desc, ln1, ln1e };

inline constexpr std::array<EstimatorId, 8> kAllEstimators = {
    EstimatorId::ls,   EstimatorId::wls,       EstimatorId::swls, EstimatorId::ml,
    EstimatorId::lmds, EstimatorId::grad_desc, EstimatorId::ln1,  EstimatorId::ln1e};

inline std::string_view estimator_key(EstimatorId id) {
  switch (id) {
    case EstimatorId::ls: return "ls";
    case EstimatorId::wls: return "wls";
    case EstimatorId::swls: return "swls";
    case EstimatorId::ml: return "ml";
    case EstimatorId::lmds: return "lmds";
    case EstimatorId::grad_desc: return "grad_desc";
    case EstimatorId::ln1: return "ln1";
    case EstimatorId::ln1e: return "ln1e";
  }
  return "?";
}

inline EstimatorId parse_estimator(std::string_view key) {
  for (auto id : kAllEstimators)
    if (estimator_key(id) == key) return id;
  throw ConfigError("unknown estimator '" + std::string(key) + "'");
}

/// Which estimators are compared under which attack. LS, SWLS and ML are
/// uncoordinated-only; LN-1E is coordinated-only. Everything runs with no
/// attack.
inline bool applicable(EstimatorId id, AttackKind kind) {
  switch (kind) {
    case AttackKind::none:
      return true;
    case AttackKind::uncoordinated:
      return id != EstimatorId::ln1e;
    case AttackKind::coordinated:
      return id != EstimatorId::ls && id != EstimatorId::swls && id != EstimatorId::ml;
  }
  return false;
}

/// True for estimators that report an eliminated-anchor set.
inline bool eliminates(EstimatorId id) {
  return id == EstimatorId::swls || id == EstimatorId::ln1e || id == EstimatorId::grad_desc;
}

enum class TopologyMode { random_fixed, random_per_trial, file };

struct ExperimentConfig {
  double area = 100.0;
  std::size_t n_anchors = 29;
  PathLossParams channel{-10.0, 4.0, 2.0};
  std::size_t packets = 10;

  AttackKind attack = AttackKind::uncoordinated;
  double sigma_att = 8.0;
  Point t_att_offset{12.0, 12.0};  // t_att = target + offset

  double malicious_fraction = 0.28;
  PlacementConstraint::Kind placement = PlacementConstraint::Kind::anywhere;
  double placement_radius = 0.0;  // around the target
  bool redraw_malicious = true;

  TopologyMode topology_mode = TopologyMode::random_fixed;
  std::uint64_t topology_seed = 1;
  std::string topology_file;
  std::optional<Point> target;  // default: centre of the area

  std::vector<EstimatorId> estimators;  // empty: every applicable estimator

  std::size_t trials = 500;
  std::uint64_t master_seed = 1;

  double zeta = 1.5;
  AdmmParams admm;
  LmdsOptions lmds;
  GradDescOptions grad_desc;

  Point target_or_centre() const {
    return target.value_or(Point(area / 2.0, area / 2.0));
  }

  AttackSpec attack_spec(const Point& true_target) const {
    switch (attack) {
      case AttackKind::none: return AttackSpec::none();
      case AttackKind::uncoordinated: return AttackSpec::uncoordinated(sigma_att);
      case AttackKind::coordinated: return AttackSpec::coordinated(true_target + t_att_offset);
    }
    return {};
  }

  std::vector<EstimatorId> enabled_estimators() const {
    if (!estimators.empty()) return estimators;
    std::vector<EstimatorId> out;
    for (auto id : kAllEstimators)
      if (applicable(id, attack)) out.push_back(id);
    return out;
  }

  void validate() const {
    channel.validate();
    if (!(area > 0.0)) throw ConfigError("area must be positive");
    if (n_anchors < 3) throw ConfigError("need at least 3 anchors");
    if (packets < 1) throw ConfigError("packets must be >= 1");
    if (trials < 1) throw ConfigError("trials must be >= 1");
    if (!(sigma_att >= 0.0)) throw ConfigError("sigma_att must be >= 0");
    (void)malicious_count(n_anchors, malicious_fraction);
    if (placement != PlacementConstraint::Kind::anywhere && !(placement_radius > 0.0))
      throw ConfigError("malicious.radius must be positive for a radius placement");
    if (topology_mode == TopologyMode::file && topology_file.empty())
      throw ConfigError("topology.mode = file needs topology.file");
    if (!(zeta > 0.0)) throw ConfigError("swls.zeta must be positive");
    admm.validate();
    if (lmds.subset_size < 3 || lmds.n_subsets < 1)
      throw ConfigError("lmds needs subset_size >= 3 and n_subsets >= 1");
    if (!(grad_desc.step > 0.0) || grad_desc.max_iters < 0 ||
        !(grad_desc.keep_fraction > 0.0 && grad_desc.keep_fraction <= 1.0))
      throw ConfigError("invalid grad_desc block");
    std::vector<EstimatorId> seen;
    for (auto id : estimators) {
      if (!applicable(id, attack))
        throw ConfigError("estimator " + std::string(estimator_key(id)) +
                          " is not compared under a " + to_string(attack) + " attack");
      if (std::find(seen.begin(), seen.end(), id) != seen.end())
        throw ConfigError("estimator listed twice: " + std::string(estimator_key(id)));
      seen.push_back(id);
    }
  }
};

/// 500-trial profile for desk-scale runs.
inline ExperimentConfig desk_profile() { return {}; }

/// Full-length profile: 5000 trials.
inline ExperimentConfig paper_profile() {
  ExperimentConfig c;
  c.trials = 5000;
  return c;
}

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

inline double to_double(const std::string& key, const std::string& v) {
  return secloc::detail::parse_double(v, "config key '" + key + "'");
}

inline std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  return out;
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config key '" + key + "': expected true/false");
}

inline Point to_point(const std::string& key, const std::string& v) {
  const auto parts = split(v, ',');
  if (parts.size() != 2) throw ConfigError("config key '" + key + "': expected 'x,y'");
  return {to_double(key, parts[0]), to_double(key, parts[1])};
}

inline AttackKind to_attack(const std::string& v) {
  if (v == "none") return AttackKind::none;
  if (v == "uncoordinated") return AttackKind::uncoordinated;
  if (v == "coordinated") return AttackKind::coordinated;
  throw ConfigError("unknown attack.kind '" + v + "'");
}

}  // namespace detail

inline ExperimentConfig builtin_profile(const std::string& name) {
  if (name == "desk") return desk_profile();
  if (name == "paper") return paper_profile();
  throw ConfigError("unknown profile '" + name + "'");
}

/// Applies one key to the configuration.
inline void apply_key(ExperimentConfig& c, const std::string& key, const std::string& v) {
  using detail::to_double;
  using detail::to_uint;
  if (key == "area") c.area = to_double(key, v);
  else if (key == "anchors") c.n_anchors = to_uint(key, v);
  else if (key == "p0") c.channel.p0 = to_double(key, v);
  else if (key == "n") c.channel.n = to_double(key, v);
  else if (key == "sigma") c.channel.sigma = to_double(key, v);
  else if (key == "packets") c.packets = to_uint(key, v);
  else if (key == "trials") c.trials = to_uint(key, v);
  else if (key == "seed") c.master_seed = to_uint(key, v);
  else if (key == "target") c.target = detail::to_point(key, v);
  else if (key == "attack.kind") c.attack = detail::to_attack(v);
  else if (key == "attack.sigma_att") c.sigma_att = to_double(key, v);
  else if (key == "attack.offset") c.t_att_offset = detail::to_point(key, v);
  else if (key == "attack.distance") {
    const double s = to_double(key, v) / std::numbers::sqrt2;
    c.t_att_offset = Point(s, s);
  } else if (key == "malicious.fraction") c.malicious_fraction = to_double(key, v);
  else if (key == "malicious.placement") {
    if (v == "anywhere") c.placement = PlacementConstraint::Kind::anywhere;
    else if (v == "within") c.placement = PlacementConstraint::Kind::within_radius;
    else if (v == "beyond") c.placement = PlacementConstraint::Kind::beyond_radius;
    else throw ConfigError("malicious.placement must be anywhere, within or beyond");
  } else if (key == "malicious.radius") c.placement_radius = to_double(key, v);
  else if (key == "malicious.redraw") c.redraw_malicious = detail::to_bool(key, v);
  else if (key == "topology.mode") {
    if (v == "random") c.topology_mode = TopologyMode::random_fixed;
    else if (v == "per_trial") c.topology_mode = TopologyMode::random_per_trial;
    else if (v == "file") c.topology_mode = TopologyMode::file;
    else throw ConfigError("topology.mode must be random, per_trial or file");
  } else if (key == "topology.seed") c.topology_seed = to_uint(key, v);
  else if (key == "topology.file") c.topology_file = v;
  else if (key == "estimators") {
    c.estimators.clear();
    if (v != "auto")
      for (const auto& name : detail::split(v, ',')) c.estimators.push_back(parse_estimator(name));
  } else if (key == "swls.zeta") c.zeta = to_double(key, v);
  else if (key == "admm.rho") c.admm.rho = to_double(key, v);
  else if (key == "admm.conv_tol") c.admm.conv_tol = to_double(key, v);
  else if (key == "admm.max_iters") c.admm.max_iters = static_cast<int>(to_uint(key, v));
  else if (key == "lmds.n_subsets") c.lmds.n_subsets = to_uint(key, v);
  else if (key == "lmds.subset_size") c.lmds.subset_size = to_uint(key, v);
  else if (key == "grad_desc.step") c.grad_desc.step = to_double(key, v);
  else if (key == "grad_desc.max_iters") c.grad_desc.max_iters = static_cast<int>(to_uint(key, v));
  else if (key == "grad_desc.keep_fraction") c.grad_desc.keep_fraction = to_double(key, v);
  else throw ConfigError("unknown config key '" + key + "'");
}

inline ExperimentConfig parse_config(std::istream& in) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::optional<std::string> profile;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    const std::string t = detail::trim(line);
    if (t.empty()) continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    std::string key = detail::trim(std::string_view(t).substr(0, eq));
    std::string value = detail::trim(std::string_view(t).substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (key == "profile") {
      profile = value;
      continue;
    }
    entries.emplace_back(std::move(key), std::move(value));
  }
  ExperimentConfig c = profile ? builtin_profile(*profile) : desk_profile();
  for (const auto& [k, v] : entries) apply_key(c, k, v);
  c.validate();
  return c;
}

/// Reads a config file. The names "desk" and "paper" resolve to the built-in
/// profiles when no file of that name exists.
inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    if (path == "desk" || path == "paper") {
      ExperimentConfig c = builtin_profile(path);
      c.validate();
      return c;
    }
    throw ConfigError("cannot open config file " + path);
  }
  ExperimentConfig c = parse_config(in);
  // topology.file is relative to the config file, not the working directory.
  if (!c.topology_file.empty()) {
    const std::filesystem::path f(c.topology_file);
    if (f.is_relative()) c.topology_file = (std::filesystem::path(path).parent_path() / f).string();
  }
  return c;
}

}  // namespace secloc::harness

#endif  // SECLOC_HARNESS_CONFIG_HPP
