// secloc: Monte-Carlo driver for RSSI localization under malicious anchors.
//
//   secloc simulate --config <file> [--seed N] [--out results.csv] [--svg plot.svg]
//   secloc sweep    --config <file> --axis <name> --values a,b,c --out <file> [--svg plot.svg]
//   secloc crlb     --config <file> [--seed N]
//   secloc detect   --config <file> [--seed N]
//
// Exit codes: 0 success, 2 configuration error, 3 runtime failure.
// SECLOC_THREADS caps worker threads (0 or unset = all cores).

#include <CLI11.hpp>

#include <cstdlib>
#include <iomanip>
#include <iostream>
#include <locale>
#include <optional>
#include <string>
#include <vector>

#include "secloc/harness/config.hpp"
#include "secloc/harness/csv.hpp"
#include "secloc/harness/monte_carlo.hpp"
#include "secloc/harness/svg.hpp"

namespace {

using namespace secloc;
using namespace secloc::harness;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

std::size_t threads_from_env() {
  const char* v = std::getenv("SECLOC_THREADS");
  if (!v || !*v) return 0;
  try {
    return static_cast<std::size_t>(harness::detail::to_uint("SECLOC_THREADS", v));
  } catch (const ConfigError&) {
    throw ConfigError(std::string("SECLOC_THREADS must be a non-negative integer, got '") + v + "'");
  }
}

ExperimentConfig load(const std::string& path, std::optional<std::uint64_t> seed) {
  ExperimentConfig c = load_config(path);
  if (seed) c.master_seed = *seed;
  c.validate();
  return c;
}

std::vector<double> parse_values(const std::string& list) {
  std::vector<double> out;
  if (harness::detail::trim(list).empty()) return out;
  for (const auto& v : harness::detail::split(list, ','))
    out.push_back(secloc::detail::parse_double(v, "--values"));
  return out;
}

void write_outputs(const std::vector<SweepPoint>& points, const std::string& out_path,
                   const std::string& svg_path, std::string_view axis_label) {
  if (out_path.empty() || out_path == "-")
    write_csv(std::cout, points);
  else
    emit_csv(points, out_path);
  if (!svg_path.empty()) emit_svg(points, axis_label, svg_path);
}

void print_detection(const Summary& s) {
  std::cout << std::fixed << std::setprecision(4);
  bool any = false;
  for (const auto& r : s.rows) {
    if (r.name != "swls" && r.name != "ln1e") continue;
    any = true;
    std::cout << r.name << ": trials_ok=" << r.trials_ok << " trials_failed=" << r.trials_failed;
    if (r.recall) std::cout << " tp_rate=" << *r.recall;
    if (r.false_elimination_rate) std::cout << " fp_rate=" << *r.false_elimination_rate;
    if (r.mean_tp) std::cout << " mean_tp=" << *r.mean_tp;
    if (r.mean_fp) std::cout << " mean_fp=" << *r.mean_fp;
    std::cout << '\n';
  }
  if (!any) std::cout << "no elimination-based estimator (swls, ln1e) applies to this attack\n";
}

}  // namespace

int main(int argc, char** argv) {
  std::locale::global(std::locale::classic());
  CLI::App app{"RSSI secure-localization simulator"};
  app.require_subcommand(1);

  std::string config_path, out_path, svg_path, axis, values;
  std::optional<std::uint64_t> seed;

  auto* simulate = app.add_subcommand("simulate", "Run one Monte-Carlo experiment");
  simulate->add_option("--config", config_path, "Config file or built-in profile (desk, paper)")->required();
  simulate->add_option("--seed", seed, "Master seed (overrides the config)");
  simulate->add_option("--out", out_path, "CSV output path (default stdout)");
  simulate->add_option("--svg", svg_path, "Optional SVG plot");

  auto* sweep_cmd = app.add_subcommand("sweep", "Sweep one parameter");
  sweep_cmd->add_option("--config", config_path, "Config file or built-in profile")->required();
  sweep_cmd->add_option("--axis", axis, "sigma_att | packets | malicious_fraction | attack_distance")->required();
  sweep_cmd->add_option("--values", values, "Comma-separated axis values")->required();
  sweep_cmd->add_option("--out", out_path, "CSV output path")->required();
  sweep_cmd->add_option("--seed", seed, "Master seed (overrides the config)");
  sweep_cmd->add_option("--svg", svg_path, "Optional SVG plot");

  auto* crlb_cmd = app.add_subcommand("crlb", "Print the Cramer-Rao bound for a config");
  crlb_cmd->add_option("--config", config_path, "Config file or built-in profile")->required();
  crlb_cmd->add_option("--seed", seed, "Master seed (overrides the config)");

  auto* detect = app.add_subcommand("detect", "Malicious-anchor detection rates");
  detect->add_option("--config", config_path, "Config file or built-in profile")->required();
  detect->add_option("--seed", seed, "Master seed (overrides the config)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    const std::size_t threads = threads_from_env();
    ExperimentConfig cfg = load(config_path, seed);

    if (*simulate) {
      const std::vector<SweepPoint> points{{std::nullopt, run_monte_carlo(cfg, threads)}};
      write_outputs(points, out_path, svg_path, "run");
    } else if (*sweep_cmd) {
      const SweepAxis ax = parse_axis(axis);
      const auto pts = sweep(cfg, ax, parse_values(values), threads);
      write_outputs(pts, out_path, svg_path, axis_name(ax));
    } else if (*crlb_cmd) {
      const auto b = config_crlb(cfg);
      std::cout << "attack=" << to_string(cfg.attack) << " trials=" << cfg.trials << " crlb_m=";
      if (b)
        std::cout << secloc::detail::format_double(*b) << '\n';
      else
        std::cout << "undefined\n";
    } else if (*detect) {
      ExperimentConfig dc = cfg;
      dc.estimators.clear();
      for (auto id : {EstimatorId::swls, EstimatorId::ln1e})
        if (applicable(id, dc.attack)) dc.estimators.push_back(id);
      if (dc.estimators.empty()) {
        print_detection(Summary{});
      } else {
        print_detection(run_monte_carlo(dc, threads));
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
