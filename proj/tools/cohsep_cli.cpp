// cohsep: sensitivity sweeps, Monte-Carlo bound comparison, certification.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 certification
// failure.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <thread>

#include "cohsep/cohsep.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kCertifyFailed = 2;

#ifndef COHSEP_PRESET_DIR
#define COHSEP_PRESET_DIR "presets"
#endif

struct Options {
  std::string config;
  std::string out_dir = ".";
  std::string preset_dir = COHSEP_PRESET_DIR;
  int figure = 0;
  bool svg = false;
  unsigned workers = 0;  // 0: from config, else hardware concurrency
  std::optional<std::uint64_t> seed;
};

std::ofstream open_output(const fs::path& path) {
  if (!path.parent_path().empty()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

unsigned default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

int run_sensitivity(const Options& opt) {
  fs::path source;
  if (opt.figure != 0)
    source = fs::path(opt.preset_dir) / ("fig" + std::to_string(opt.figure) + ".ini");
  else
    source = opt.config;
  const auto cfg = cohsep::config::load(source.string());
  const unsigned workers = opt.workers ? opt.workers : default_workers();
  const auto rows = cohsep::run_sweep(cfg, workers);

  std::size_t failed = 0;
  for (const auto& r : rows)
    if (!r.error.empty()) {
      if (failed++ < 5) std::cerr << "warning: " << r.curve << " at " << r.axis_value << ": " << r.error << '\n';
    }
  if (failed > 5) std::cerr << "warning: " << failed - 5 << " more points could not be evaluated\n";
  if (!rows.empty() && failed == rows.size()) {
    std::cerr << "error: no sweep point could be evaluated\n";
    return kUsage;
  }
  std::set<std::string> seen;
  for (const auto& r : rows) {
    for (const auto& w : r.report.warnings)
      if (seen.insert(w).second) std::cerr << "warning: " << w << '\n';
  }

  const std::string stem = source.stem().string();
  const fs::path csv_path = fs::path(opt.out_dir) / (stem + ".csv");
  {
    auto out = open_output(csv_path);
    cohsep::write_sweep_csv(out, cfg, rows);
  }
  std::cout << csv_path.string() << '\n';
  if (opt.svg) {
    const fs::path svg_path = fs::path(opt.out_dir) / (stem + ".svg");
    auto out = open_output(svg_path);
    cohsep::write_sweep_svg(out, cfg, rows);
    std::cout << svg_path.string() << '\n';
  }
  return kOk;
}

int run_montecarlo(const Options& opt) {
  const auto cfg = cohsep::config::load(opt.config);
  cohsep::config::Settings base = cfg.base;
  if (opt.seed) base.seed = *opt.seed;
  const unsigned workers = opt.workers ? opt.workers : base.workers;

  std::vector<cohsep::ExperimentPlan> plans;
  if (cfg.plans.empty()) {
    for (auto& p : cohsep::config::to_plans(base, "default")) plans.push_back(std::move(p));
  } else {
    for (const auto& o : cfg.plans) {
      auto s = cohsep::config::with_overrides(base, o);
      if (opt.seed) s.seed = *opt.seed;
      for (auto& p : cohsep::config::to_plans(s, o.name)) plans.push_back(std::move(p));
    }
  }
  const auto results = cohsep::bound_comparison_sweep(plans, workers);

  const fs::path csv_path = fs::path(opt.out_dir) / (fs::path(opt.config).stem().string() + ".csv");
  {
    auto out = open_output(csv_path);
    cohsep::csv::write_montecarlo(out, plans, results);
  }
  std::set<std::string> seen;
  for (const auto& r : results) {
    std::cout << r.plan << " [" << cohsep::mode_name(r.mode) << "] ratio " << r.ratio << " (z " << r.z_score
              << ", bias z " << r.bias_z << ")\n";
    for (const auto& w : r.warnings)
      if (seen.insert(w).second) std::cerr << "warning: " << w << '\n';
  }
  std::cout << csv_path.string() << '\n';
  return kOk;
}

int run_certify(const Options& opt) {
  const unsigned workers = opt.workers ? opt.workers : default_workers();
  const auto results = cohsep::certify::run_all({}, workers);
  cohsep::certify::write_table(std::cout, results);
  if (opt.out_dir != ".") {
    auto out = open_output(fs::path(opt.out_dir) / "certify.csv");
    cohsep::certify::write_table(out, results);
  }
  return cohsep::certify::all_passed(results) ? kOk : kCertifyFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Moment-based separation sensitivity for mutually coherent sources"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);
  Options opt;

  auto* sens = app.add_subcommand("sensitivity", "Sensitivity sweep from a config or a figure preset");
  auto* cfg_opt = sens->add_option("--config", opt.config, "INI configuration file")->check(CLI::ExistingFile);
  sens->add_option("--figure", opt.figure, "Figure preset to reproduce")
      ->check(CLI::Range(2, 7))
      ->excludes(cfg_opt);
  sens->add_option("--preset-dir", opt.preset_dir, "Directory holding figN.ini presets");
  sens->add_option("--out-dir", opt.out_dir, "Output directory");
  sens->add_flag("--svg", opt.svg, "Also write an SVG plot");
  sens->add_option("--workers", opt.workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* mc = app.add_subcommand("montecarlo", "Monte-Carlo comparison of estimator variance and bound");
  mc->add_option("--config", opt.config, "INI configuration file")->required()->check(CLI::ExistingFile);
  mc->add_option("--seed", opt.seed, "Override the configured seed");
  mc->add_option("--out-dir", opt.out_dir, "Output directory");
  mc->add_option("--workers", opt.workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* cert = app.add_subcommand("certify", "Run the invariant suite");
  cert->add_option("--out-dir", opt.out_dir, "Also write certify.csv here");
  cert->add_option("--workers", opt.workers, "Worker threads")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*sens) {
      if (opt.config.empty() && opt.figure == 0) {
        std::cerr << "sensitivity: one of --config or --figure is required\n" << sens->help();
        return kUsage;
      }
      return run_sensitivity(opt);
    }
    if (*mc) return run_montecarlo(opt);
    return run_certify(opt);
  } catch (const cohsep::config::config_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  }
}
