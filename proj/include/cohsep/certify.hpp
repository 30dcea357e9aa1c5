#pragma once

// Invariant suite run by `cohsep certify`: HG vs DI ordering over a
// (theta, phi, d) grid, closed forms against quadrature and finite sums,
// the M0 remapping identity, covariance inversion and the sensitivity
// decomposition, plus the analytic limits.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "cohsep/bases.hpp"
#include "cohsep/csv.hpp"
#include "cohsep/montecarlo.hpp"
#include "cohsep/optics.hpp"
#include "cohsep/sensitivity.hpp"

namespace cohsep::certify {

/// Test seams. `hg_chi` rewrites the interference parameter seen by the HG
/// side of the ordering check; the identity leaves the suite untouched.
struct Hooks {
  std::function<double(double)> hg_chi = [](double chi) { return chi; };
};

struct CheckResult {
  std::string name;
  std::string metric;     // what `worst` measures
  std::size_t cases = 0;
  std::size_t failures = 0;
  double worst = 0.0;
  double tolerance = 0.0;
  bool passed() const { return failures == 0 && cases > 0; }
};

struct Grid {
  std::vector<double> thetas{0.0, numeric::pi / 16, numeric::pi / 8, 3 * numeric::pi / 16, numeric::pi / 4};
  std::vector<double> phis;
  std::vector<double> d_over_sigma;

  Grid() {
    for (int k = 0; k <= 8; ++k) phis.push_back(k * numeric::pi / 8);
    for (int k = 0; k < 20; ++k) d_over_sigma.push_back(0.1 + k * 4.9 / 19.0);
  }
};

inline bool is_equality_case(const SourceScene& s) {
  return s.theta() == 0.0 || s.sin_phi() == 0.0;
}

/// A real-field scene sharing d, sigma, kappa, N_S with `s` whose
/// interference parameter is `chi`.
inline SourceScene scene_with_chi(const SourceScene& s, double chi) {
  chi = std::clamp(chi, -1.0, 1.0);
  return s.with_theta(0.5 * std::asin(std::abs(chi))).with_phi(chi < 0.0 ? numeric::pi : 0.0);
}

inline double rel_diff(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  return scale == 0.0 ? 0.0 : std::abs(a - b) / scale;
}

inline std::vector<SourceScene> grid_scenes(const Grid& g, bool real_phases_only) {
  std::vector<SourceScene> out;
  for (double th : g.thetas)
    for (double ph : g.phis) {
      if (real_phases_only && ph != 0.0 && ph != numeric::pi) continue;
      for (double x : g.d_over_sigma) out.push_back(SourceScene::make(x, 1.0, th, ph, 1.0, 1.0));
    }
  return out;
}

// ---------------------------------------------------------------------------

inline CheckResult check_theorem(const Grid& g, const Hooks& hooks, unsigned workers) {
  const auto scenes = grid_scenes(g, false);
  std::vector<double> hg(scenes.size()), di(scenes.size()), err(scenes.size());
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    const auto& s = scenes[i];
    hg[i] = m_eps(hg_mode_signal(scene_with_chi(s, hooks.hg_chi(scene_chi(s)))));
    const auto q = m_eps_quadrature_di(s);
    di[i] = q.value;
    err[i] = q.error;
  });
  CheckResult r{"theorem_grid", "max_rel_gap_equality", scenes.size(), 0, 0.0, 1e-6};
  for (std::size_t i = 0; i < scenes.size(); ++i) {
    if (is_equality_case(scenes[i])) {
      const double gap = rel_diff(hg[i], di[i]);
      r.worst = std::max(r.worst, gap);
      if (!(gap <= r.tolerance)) ++r.failures;
    } else if (!(hg[i] - di[i] > 10.0 * err[i])) {
      ++r.failures;
    }
  }
  return r;
}

inline CheckResult check_closed_vs_quadrature(const Grid& g, unsigned workers) {
  const auto scenes = grid_scenes(g, true);
  std::vector<double> gap(scenes.size());
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    gap[i] = rel_diff(m_eps_quadrature_di(scenes[i]).value, m_eps_closed_di(scenes[i]));
  });
  CheckResult r{"closed_vs_quadrature", "max_rel_diff", scenes.size(), 0, 0.0, 1e-6};
  for (double v : gap) {
    r.worst = std::max(r.worst, v);
    if (!(v <= r.tolerance)) ++r.failures;
  }
  return r;
}

inline CheckResult check_hg_convergence(const Grid& g) {
  CheckResult r{"hg_convergence", "max_rel_diff", 0, 0, 0.0, 1e-9};
  for (const auto& s : grid_scenes(g, true)) {
    const double v = rel_diff(m_eps(hg_mode_signal(s)), m_eps_closed_hg(s));
    ++r.cases;
    r.worst = std::max(r.worst, v);
    if (!(v <= r.tolerance)) ++r.failures;
  }
  return r;
}

inline CheckResult check_m0_identity(const Grid& g, unsigned workers) {
  const auto scenes = grid_scenes(g, false);
  std::vector<double> gap(scenes.size());
  parallel_for(scenes.size(), workers, [&](std::size_t i) {
    const double hg = m0_from_signal(hg_mode_signal(scenes[i]));
    const double di = m0_quadrature_di(equivalent_real_scene(scenes[i])).value;
    gap[i] = rel_diff(hg, di);
  });
  CheckResult r{"m0_identity", "max_rel_diff", scenes.size(), 0, 0.0, 1e-6};
  for (double v : gap) {
    r.worst = std::max(r.worst, v);
    if (!(v <= r.tolerance)) ++r.failures;
  }
  return r;
}

/// Random signal with positive means and arbitrary derivatives.
inline ModeSignal random_signal(std::mt19937_64& rng, std::size_t modes) {
  std::uniform_real_distribution<double> mean(0.05, 1.0), deriv(-1.0, 1.0);
  ModeSignal s;
  s.n_s = 1.0;
  for (std::size_t m = 0; m < modes; ++m) {
    s.means.push_back(mean(rng));
    s.d_derivs.push_back(deriv(rng));
    s.ns_derivs.push_back(deriv(rng));
  }
  finalize_signal(s, 0.0);
  return s;
}

inline CheckResult check_covariance_inverse() {
  CheckResult r{"covariance_inverse", "max_abs_dev_identity", 0, 0, 0.0, 1e-10};
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    const ModeSignal s = random_signal(rng, 6 + static_cast<std::size_t>(trial));
    for (double h : {-0.1, 0.0, 1.0}) {
      const SourceStatistics stats = CustomH{h};
      const DenseMatrix g = covariance(s, stats), gi = covariance_inverse(s, stats);
      const std::size_t k = s.size();
      double dev = 0.0;
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) {
          double acc = 0.0;
          for (std::size_t l = 0; l < k; ++l) acc += g(i, l) * gi(l, j);
          dev = std::max(dev, std::abs(acc - (i == j ? 1.0 : 0.0)));
        }
      ++r.cases;
      r.worst = std::max(r.worst, dev);
      if (!(dev <= r.tolerance)) ++r.failures;
    }
  }
  return r;
}

inline CheckResult check_decomposition() {
  CheckResult r{"sensitivity_decomposition", "max_rel_diff", 0, 0, 0.0, 1e-10};
  std::mt19937_64 rng(11);
  const std::array params{Parameter::separation, Parameter::photon_number};
  for (int trial = 0; trial < 5; ++trial) {
    const ModeSignal s = random_signal(rng, 5 + static_cast<std::size_t>(trial));
    for (double h : {-0.1, 0.0, 1.0}) {
      const SourceStatistics stats = CustomH{h};
      const DenseMatrix a = sensitivity_matrix(s, stats, params);
      const DenseMatrix b = sensitivity_matrix_decomposed(s, stats, params);
      double scale = 0.0, dev = 0.0;
      for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
          scale = std::max(scale, std::abs(a(i, j)));
          dev = std::max(dev, std::abs(a(i, j) - b(i, j)));
        }
      const double v = dev / scale;
      ++r.cases;
      r.worst = std::max(r.worst, v);
      if (!(v <= r.tolerance)) ++r.failures;
    }
  }
  return r;
}

inline CheckResult check_m_D_explicit(const Grid& g) {
  CheckResult r{"m_D_explicit", "max_rel_diff", 0, 0, 0.0, 1e-12};
  const std::array<SourceStatistics, 3> stats{Fock{}, Poisson{}, Thermal{}};
  for (double th : g.thetas)
    for (double ph : g.phis)
      for (double x : {0.3, 1.0, 2.5}) {
        const auto s = SourceScene::make(x, 1.0, th, ph, 0.2, 10.0);
        const ModeSignal sig = hg_mode_signal(s);
        for (const auto& st : stats) {
          const double a = m_D_explicit(s, st), b = m_D(sig, st);
          const double scale = std::max({std::abs(a), std::abs(b), 1e-300});
          // M_D vanishes identically at chi = 0; compare absolutely there
          const double v = std::abs(a - b) / (scene_chi(s) == 0.0 ? 1.0 : scale);
          ++r.cases;
          r.worst = std::max(r.worst, v);
          if (!(v <= r.tolerance)) ++r.failures;
        }
      }
  return r;
}

inline CheckResult check_limits(const Grid& g) {
  CheckResult r{"known_limits", "max_rel_diff", 0, 0, 0.0, 1e-9};
  auto record = [&](double v, double tol) {
    ++r.cases;
    r.worst = std::max(r.worst, v);
    if (!(v <= tol)) ++r.failures;
  };
  for (double x : g.d_over_sigma) {
    const double sigma = 1.3;
    // single source
    const auto s0 = SourceScene::make(x * sigma, sigma, 0.0, 0.0, 0.5, 4.0);
    const double target = 1.0 / (4.0 * sigma * sigma);
    record(rel_diff(m_eps(hg_mode_signal(s0)), target), 1e-9);
    record(rel_diff(m_eps_closed_di(s0), target), 1e-12);
    record(rel_diff(m_eps_quadrature_di(s0).value, target), 1e-9);
    // chi = 0
    const auto sc = SourceScene::make(x * sigma, sigma, numeric::pi / 4, numeric::pi / 2, 0.5, 4.0);
    const auto rep = total_report(sc, Poisson{}, HermiteGauss{});
    record(std::abs(rep.normalized.eps - 1.0), 1e-9);
    record(std::abs(rep.m_D), 1e-12);
  }
  // anti-phase equal sources, Poisson, d -> 0: normalized M_D -> 2
  const auto sa = SourceScene::make(1e-3, 1.0, numeric::pi / 4, numeric::pi, 1.0, 1.0);
  record(std::abs(normalization(sa) * m_D_explicit(sa, Poisson{}) - 2.0) / 2.0, 1e-3);
  return r;
}

inline std::vector<CheckResult> run_all(const Hooks& hooks = {}, unsigned workers = 1) {
  const Grid g;
  return {check_closed_vs_quadrature(g, workers),
          check_hg_convergence(g),
          check_theorem(g, hooks, workers),
          check_m0_identity(g, workers),
          check_covariance_inverse(),
          check_decomposition(),
          check_m_D_explicit(g),
          check_limits(g)};
}

inline bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& c) { return c.passed(); });
}

inline void write_table(std::ostream& os, const std::vector<CheckResult>& results) {
  csv::write_preamble(os, "cohsep.certify", 1);
  os << "check,status,cases,failures,metric,worst,tolerance\n";
  for (const auto& c : results)
    os << c.name << ',' << (c.passed() ? "pass" : "fail") << ',' << c.cases << ',' << c.failures << ','
       << c.metric << ',' << csv::num(c.worst) << ',' << csv::num(c.tolerance) << '\n';
}

}  // namespace cohsep::certify
