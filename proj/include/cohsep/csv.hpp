#pragma once

// CSV emission. Every file starts with `#` metadata lines, the first of which
// names the schema and its version, followed by one header row. Numbers are
// written in shortest round-trip form so output is byte-stable.

#include <charconv>
#include <cmath>
#include <concepts>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cohsep/bases.hpp"
#include "cohsep/montecarlo.hpp"
#include "cohsep/optics.hpp"
#include "cohsep/sensitivity.hpp"

namespace cohsep::csv {

inline constexpr std::string_view kLibraryVersion = "1.0.0";

inline std::string num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

template <std::integral T>
std::string num(T v) {
  return std::to_string(v);
}

inline void write_row(std::ostream& os, std::span<const std::string> cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) os << ',';
    os << cells[i];
  }
  os << '\n';
}

inline void write_preamble(std::ostream& os, std::string_view schema, int schema_version) {
  os << "# schema: " << schema << " v" << schema_version << '\n';
  os << "# cohsep " << kLibraryVersion << '\n';
}

// ---------------------------------------------------------------------------

inline void write_mode_signal(std::ostream& os, const ModeSignal& s) {
  write_preamble(os, "cohsep.mode_signal", 1);
  os << "# total: " << num(s.total) << '\n';
  os << "mode_index,mean,epsilon,d_deriv\n";
  for (std::size_t m = 0; m < s.size(); ++m)
    os << m << ',' << num(s.means[m]) << ',' << num(s.epsilons[m]) << ',' << num(s.d_derivs[m]) << '\n';
}

inline const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {
      "d",          "sigma",         "theta",         "phi",          "kappa",
      "n_s",        "chi",           "statistics",    "h",            "basis",
      "modes",      "n_d",           "var_n_d",       "truncation",   "m_eps",
      "m_D",        "m_d",           "M_dd",          "M_dn",         "M_nn",
      "bound_known_ns", "bound_unknown_ns", "norm_m_eps", "norm_m_D",   "norm_m_d"};
  return cols;
}

inline void write_report_header(std::ostream& os) {
  write_preamble(os, "cohsep.report", 1);
  write_row(os, report_columns());
}

inline void write_report_row(std::ostream& os, const SourceScene& s, const SourceStatistics& stats,
                             std::string_view basis_label, const SensitivityReport& r) {
  const std::vector<std::string> cells = {
      num(s.d()), num(s.sigma()), num(s.theta()), num(s.phi()), num(s.kappa()), num(s.n_s()),
      num(scene_chi(s)), statistics_name(stats), num(r.h), std::string(basis_label),
      std::to_string(r.modes), num(r.n_d), num(r.var_n_d), num(r.truncation_error), num(r.m_eps),
      num(r.m_D), num(r.m_d), num(r.two_param[0][0]), num(r.two_param[0][1]),
      num(r.two_param[1][1]), num(r.bound_known_ns), num(r.bound_unknown_ns),
      num(r.normalized.eps), num(r.normalized.D), num(r.normalized.d)};
  write_row(os, cells);
}

inline const std::vector<std::string>& montecarlo_columns() {
  static const std::vector<std::string> cols = {
      "plan",        "seed",         "mode",          "statistics",    "basis",
      "d",           "sigma",        "theta",         "phi",           "kappa",
      "n_s",         "chi",          "mu",            "trials",        "d_hat_mean",
      "d_hat_var",   "d_hat_var_se", "bias_z",        "sensitivity",   "predicted_bound",
      "ratio",       "z_score",      "n_d_mean",      "n_d_mean_se",   "n_d_var",
      "n_d_var_se",  "n_d_predicted", "var_n_d_predicted"};
  return cols;
}

inline void write_montecarlo(std::ostream& os, std::span<const ExperimentPlan> plans,
                             std::span<const EstimationResult> results) {
  write_preamble(os, "cohsep.montecarlo", 1);
  if (!plans.empty()) os << "# seed: " << plans.front().seed << '\n';
  write_row(os, montecarlo_columns());
  for (std::size_t i = 0; i < results.size(); ++i) {
    const auto& p = plans[i];
    const auto& r = results[i];
    const auto& s = p.scene;
    const std::vector<std::string> cells = {
        p.name.empty() ? "plan" + std::to_string(i) : p.name, num(r.seed), mode_name(r.mode),
        statistics_name(p.stats), basis_name(p.basis), num(s.d()), num(s.sigma()), num(s.theta()),
        num(s.phi()), num(s.kappa()), num(s.n_s()), num(scene_chi(s)), num(r.mu), num(r.trials),
        num(r.d_hat_mean), num(r.d_hat_var), num(r.d_hat_var_se), num(r.bias_z), num(r.sensitivity),
        num(r.predicted_bound), num(r.ratio), num(r.z_score), num(r.n_d_empirical.mean),
        num(r.n_d_empirical.mean_se), num(r.n_d_empirical.variance),
        num(r.n_d_empirical.variance_se), num(r.n_d_predicted), num(r.var_n_d_predicted)};
    write_row(os, cells);
  }
}

}  // namespace cohsep::csv
