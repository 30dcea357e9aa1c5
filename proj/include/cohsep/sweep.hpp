#pragma once

// Parameter sweeps over configured curves, the continuous direct-imaging
// report, and CSV/SVG output for sweeps and figure presets.

#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cohsep/config.hpp"
#include "cohsep/csv.hpp"
#include "cohsep/montecarlo.hpp"
#include "cohsep/sensitivity.hpp"
#include "cohsep/svg.hpp"

namespace cohsep {

/// Report for direct imaging on an infinitely fine pixel grid: M_eps from the
/// continuous integral, the total-count part from N_D alone.
inline SensitivityReport continuum_di_report(const SourceScene& s, const SourceStatistics& stats,
                                             const QuadratureOptions& opt = {}) {
  require_not_dark(s, "continuum_di_report");
  SensitivityReport r;
  r.n_d = total_detected(s);
  r.h = h_param(stats, s.n_s());
  const double factor = 1.0 + r.h * r.n_d;
  if (!(factor > 0.0)) throw singular_matrix("1 + h N_D <= 0: total-count covariance is singular");
  r.var_n_d = r.n_d * factor;
  const auto q = m_eps_quadrature_di(s, opt);
  r.truncation_error = q.error;
  r.m_eps = q.value;
  const double dd = total_detected_d_deriv(s);
  const double dn = total_detected_ns_deriv(s);
  r.m_D = dd * dd / r.var_n_d;
  r.m_d = r.n_d * r.m_eps + r.m_D;
  r.two_param = {{{r.m_d, dd * dn / r.var_n_d}, {dd * dn / r.var_n_d, dn * dn / r.var_n_d}}};
  r.bound_known_ns = r.m_d > 0.0 ? 1.0 / r.m_d : kInfinity;
  r.bound_unknown_ns = r.m_eps > 0.0 ? 1.0 / (r.n_d * r.m_eps) : kInfinity;
  const double norm = normalization(s);
  r.normalized = {norm * r.n_d * r.m_eps, norm * r.m_D, norm * r.m_d};
  r.warnings = statistics_warnings(s, stats);
  return r;
}

inline SensitivityReport evaluate(const config::Materialized& m) {
  return m.di_continuum ? continuum_di_report(m.scene, m.stats) : total_report(m.scene, m.stats, m.basis);
}

inline double pick(const SensitivityReport& r, config::Quantity q) {
  switch (q) {
    case config::Quantity::m_eps: return r.normalized.eps;
    case config::Quantity::m_D: return r.normalized.D;
    default: return r.normalized.d;
  }
}

inline void set_axis(config::Settings& s, config::SweepAxis axis, double v) {
  switch (axis) {
    case config::SweepAxis::d_over_sigma: s.d = v * s.sigma; break;
    case config::SweepAxis::chi: s.chi = v; break;
    case config::SweepAxis::theta: s.theta = v; break;
    case config::SweepAxis::phi: s.phi = v; s.chi.reset(); break;
    case config::SweepAxis::n_s: s.n_s = v; break;
  }
}

struct SweepRow {
  std::string curve;
  std::string label;
  double axis_value = 0.0;
  config::Quantity quantity = config::Quantity::m_d;
  std::string basis_label;
  std::optional<config::Materialized> setup;
  SensitivityReport report;
  std::string error;  // non-empty when this point could not be evaluated
};

/// Evaluates every (curve, sweep point) pair; rows come out curve-major in
/// input order regardless of the number of workers.
inline std::vector<SweepRow> run_sweep(const config::Config& cfg, unsigned workers = 1) {
  std::vector<config::NamedOverrides> curves = cfg.curves;
  if (curves.empty()) curves.push_back({"default", {}, {}});
  const std::vector<double> xs = cfg.sweep ? cfg.sweep->values() : std::vector<double>{};
  const std::size_t per_curve = cfg.sweep ? xs.size() : 1;

  std::vector<config::Settings> settings;
  settings.reserve(curves.size());
  for (const auto& c : curves) settings.push_back(config::with_overrides(cfg.base, c));

  std::vector<SweepRow> rows(curves.size() * per_curve);
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    const std::size_t c = i / per_curve, k = i % per_curve;
    config::Settings s = settings[c];
    SweepRow& row = rows[i];
    row.curve = curves[c].name;
    row.label = s.label.empty() ? curves[c].name : s.label;
    row.quantity = s.quantity;
    row.basis_label = s.basis_kind;
    if (cfg.sweep) {
      row.axis_value = xs[k];
      set_axis(s, cfg.sweep->axis, xs[k]);
    }
    try {
      row.setup = config::materialize(s);
      row.report = evaluate(*row.setup);
    } catch (const config::config_error& e) {
      row.error = e.what();
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

inline void write_sweep_csv(std::ostream& os, const config::Config& cfg, const std::vector<SweepRow>& rows) {
  csv::write_preamble(os, "cohsep.sweep", 1);
  if (cfg.figure) os << "# figure: " << cfg.figure->id << '\n';
  if (cfg.sweep) os << "# axis: " << config::axis_name(cfg.sweep->axis) << '\n';
  os << "curve,label,axis_value,quantity,value";
  for (const auto& c : csv::report_columns()) os << ',' << c;
  os << ",error\n";
  for (const auto& r : rows) {
    os << r.curve << ',' << r.label << ',' << csv::num(r.axis_value) << ','
       << config::quantity_name(r.quantity) << ',';
    if (!r.error.empty()) {
      os << "nan";
      for (std::size_t i = 0; i < csv::report_columns().size(); ++i) os << ",";
      std::string msg = r.error;
      std::replace(msg.begin(), msg.end(), ',', ';');
      os << ',' << msg << '\n';
      continue;
    }
    os << csv::num(pick(r.report, r.quantity)) << ',';
    std::ostringstream line;
    csv::write_report_row(line, r.setup->scene, r.setup->stats, r.basis_label, r.report);
    std::string body = line.str();
    body.pop_back();
    os << body << ",\n";
  }
}

inline void write_sweep_svg(std::ostream& os, const config::Config& cfg, const std::vector<SweepRow>& rows) {
  std::vector<svg::Series> series;
  std::string current;
  for (const auto& r : rows) {
    if (series.empty() || r.curve != current) {
      series.push_back({r.label, {}, {}});
      current = r.curve;
    }
    series.back().x.push_back(r.axis_value);
    series.back().y.push_back(r.error.empty() ? pick(r.report, r.quantity)
                                              : std::numeric_limits<double>::quiet_NaN());
  }
  svg::PlotOptions opt;
  opt.title = cfg.figure && !cfg.figure->title.empty() ? cfg.figure->title : "normalized sensitivity";
  opt.x_label = cfg.sweep ? (cfg.sweep->axis == config::SweepAxis::d_over_sigma ? "d / sigma"
                                                                                : config::axis_name(cfg.sweep->axis))
                          : "";
  opt.y_label = rows.empty() ? "" : config::quantity_name(rows.front().quantity) + " (normalized per emitted photon)";
  svg::write_plot(os, series, opt);
}

}  // namespace cohsep
