// Acceptance run: one PASS/FAIL line per criterion, detail lines indented.
// Exit status is the number of failed criteria.

#include <Eigen/Dense>

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "cohsep/cohsep.hpp"

using namespace cohsep;
using numeric::pi;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string summary;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel(double a, double b) {
  const double s = std::max(std::abs(a), std::abs(b));
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

std::string fmt(const char* f, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned workers() { return std::max(2u, std::thread::hardware_concurrency()); }

const std::vector<double> kThetas{0.0, pi / 16, pi / 8, 3 * pi / 16, pi / 4};

std::vector<double> d_grid() {
  std::vector<double> out;
  for (int k = 0; k < 20; ++k) out.push_back(0.1 + k * 4.9 / 19.0);
  return out;
}

std::vector<double> phi_grid() {
  std::vector<double> out;
  for (int k = 0; k <= 8; ++k) out.push_back(k * pi / 8);
  return out;
}

std::vector<SourceScene> scenes(const std::vector<double>& phis) {
  std::vector<SourceScene> out;
  for (double th : kThetas)
    for (double ph : phis)
      for (double x : d_grid()) out.push_back(SourceScene::make(x, 1.0, th, ph, 1.0, 1.0));
  return out;
}

Outcome c1_closed_form() {
  const auto t0 = Clock::now();
  const auto grid = scenes({0.0, pi});
  std::vector<double> gap(grid.size());
  parallel_for(grid.size(), workers(), [&](std::size_t i) {
    gap[i] = rel(m_eps_quadrature_di(grid[i]).value, m_eps_closed_di(grid[i]));
  });
  const double worst = *std::max_element(gap.begin(), gap.end());
  const double t = seconds_since(t0);
  return {worst <= 1e-6 && t < 30.0, fmt("%zu cases, max rel diff %.2e (tol 1e-6), %.2f s (limit 30 s)", grid.size(), worst, t)};
}

Outcome c2_hg_convergence() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t n = 0;
  for (const auto& s : scenes({0.0, pi})) {
    worst = std::max(worst, rel(m_eps(hg_mode_signal(s)), m_eps_closed_hg(s)));
    ++n;
  }
  // the closed form also covers complex fields
  for (const auto& s : scenes(phi_grid())) {
    worst = std::max(worst, rel(m_eps(hg_mode_signal(s)), m_eps_closed_hg(s)));
    ++n;
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-9 && t < 5.0, fmt("%zu cases, max rel diff %.2e (tol 1e-9), %.2f s (limit 5 s)", n, worst, t)};
}

Outcome c3_theorem() {
  const auto grid = scenes(phi_grid());
  std::vector<double> hg(grid.size()), di(grid.size()), err(grid.size());
  parallel_for(grid.size(), workers(), [&](std::size_t i) {
    hg[i] = m_eps(hg_mode_signal(grid[i]));
    const auto q = m_eps_quadrature_di(grid[i]);
    di[i] = q.value;
    err[i] = q.error;
  });
  std::size_t eq = 0, strict = 0, bad_eq = 0, bad_strict = 0, below = 0;
  double worst_eq = 0.0, min_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& s = grid[i];
    if (hg[i] < di[i] * (1 - 1e-6)) ++below;
    if (s.theta() == 0.0 || s.sin_phi() == 0.0) {
      ++eq;
      worst_eq = std::max(worst_eq, rel(hg[i], di[i]));
      if (rel(hg[i], di[i]) > 1e-6) ++bad_eq;
    } else {
      ++strict;
      min_margin = std::min(min_margin, (hg[i] - di[i]) / std::max(err[i], 1e-300));
      if (!(hg[i] - di[i] > 10.0 * err[i])) ++bad_strict;
    }
  }
  return {bad_eq == 0 && bad_strict == 0 && below == 0,
          fmt("%zu points: %zu equality cases (max rel gap %.2e), %zu strict (min gap/err %.2e, %zu below 10x), %zu with HG < DI",
              grid.size(), eq, worst_eq, strict, min_margin, bad_strict, below)};
}

Outcome c4_m0_identity() {
  const auto grid = scenes(phi_grid());
  std::vector<double> gap(grid.size());
  parallel_for(grid.size(), workers(), [&](std::size_t i) {
    const auto& s = grid[i];
    // independent construction of the equivalent real scene
    const double chi = std::sin(2 * s.theta()) * std::cos(s.phi());
    const auto real = SourceScene::make(s.d(), s.sigma(), 0.5 * std::asin(std::abs(chi)), chi < 0 ? pi : 0.0,
                                        s.kappa(), s.n_s());
    gap[i] = rel(m0_from_signal(hg_mode_signal(s)), m0_quadrature_di(real).value);
  });
  const double worst = *std::max_element(gap.begin(), gap.end());
  return {worst <= 1e-6, fmt("%zu cases, max rel diff %.2e (tol 1e-6)", grid.size(), worst)};
}

Outcome c5_algebra() {
  std::mt19937_64 rng(5);
  double inv_dev = 0.0, id_dev = 0.0, sm_dev = 0.0;
  const std::array params{Parameter::separation, Parameter::photon_number};
  for (int trial = 0; trial < 5; ++trial) {
    const ModeSignal s = certify::random_signal(rng, 3 + 2 * static_cast<std::size_t>(trial));
    const auto n = static_cast<Eigen::Index>(s.size());
    const Eigen::Map<const Eigen::VectorXd> mean(s.means.data(), n), dd(s.d_derivs.data(), n),
        dn(s.ns_derivs.data(), n);
    for (double h : {-0.1, 0.0, 1.0}) {
      const SourceStatistics stats = CustomH{h};
      Eigen::MatrixXd gamma = mean.asDiagonal();
      gamma += h * mean * mean.transpose();
      const Eigen::MatrixXd dense_inv = gamma.inverse();
      const auto gi = covariance_inverse(s, stats);
      Eigen::MatrixXd lib(n, n);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) lib(i, j) = gi(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
      inv_dev = std::max(inv_dev, (lib - dense_inv).cwiseAbs().maxCoeff() / dense_inv.cwiseAbs().maxCoeff());
      id_dev = std::max(id_dev, (gamma * lib - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff());
      // brute-force double sum against the intensity/total-count split
      const Eigen::Vector2d rows[2] = {{dd.dot(dense_inv * dd), dd.dot(dense_inv * dn)},
                                       {dn.dot(dense_inv * dd), dn.dot(dense_inv * dn)}};
      const auto split = sensitivity_matrix_decomposed(s, stats, params);
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
          sm_dev = std::max(sm_dev, std::abs(split(i, j) - rows[i][j]) / std::abs(rows[0][0]));
    }
  }
  double md_dev = 0.0;
  const std::array<SourceStatistics, 3> kinds{Fock{}, Poisson{}, Thermal{}};
  for (double th : kThetas)
    for (double ph : phi_grid())
      for (double x : {0.3, 1.0, 2.5}) {
        const auto s = SourceScene::make(x, 1.0, th, ph, 0.2, 10.0);
        const auto sig = hg_mode_signal(s);
        for (const auto& st : kinds) {
          // error propagation through the total count only
          const double var = total_detected(s) * (1 + h_param(st, s.n_s()) * total_detected(s));
          const double ref = total_detected_d_deriv(s) * total_detected_d_deriv(s) / var;
          const double v = m_D_explicit(s, st);
          md_dev = std::max(md_dev, ref == 0.0 ? std::abs(v) : rel(v, ref));
          md_dev = std::max(md_dev, ref == 0.0 ? std::abs(m_D(sig, st)) : rel(m_D(sig, st), ref));
        }
      }
  const bool pass = inv_dev <= 1e-10 && id_dev <= 1e-10 && sm_dev <= 1e-10 && md_dev <= 1e-12;
  return {pass, fmt("inverse vs dense %.2e, |G Ginv - I| %.2e, matrix split %.2e (tol 1e-10); M_D explicit %.2e (tol 1e-12)",
                    inv_dev, id_dev, sm_dev, md_dev)};
}

Outcome c6_limits() {
  double single = 0.0, chi0_eps = 0.0, chi0_md = 0.0;
  for (double x : d_grid()) {
    const double sigma = 0.8;
    const auto s0 = SourceScene::make(x * sigma, sigma, 0.0, 1.0, 0.5, 3.0);
    const double target = 1 / (4 * sigma * sigma);
    single = std::max({single, rel(m_eps(hg_mode_signal(s0)), target), rel(m_eps_quadrature_di(s0).value, target)});
    for (const SourceStatistics& st : {SourceStatistics{Poisson{}}, SourceStatistics{Thermal{}}}) {
      const auto r = total_report(SourceScene::make(x * sigma, sigma, pi / 4, pi / 2, 0.5, 3.0), st, HermiteGauss{});
      chi0_eps = std::max(chi0_eps, std::abs(r.normalized.eps - 1));
      chi0_md = std::max(chi0_md, std::abs(r.m_D));
    }
  }
  // series oracle: 1 - delta = u - u^2/2 + ..., u = d^2/8
  const double d = 1e-3, u = d * d / 8;
  const double one_minus = u - u * u / 2 + u * u * u / 6;
  const double dprime = (d / 4) * (1 - one_minus);  // d/dd of (1 - delta) at sigma = 1
  const double oracle = 4.0 / one_minus * dprime * dprime;
  const auto anti = SourceScene::make(d, 1.0, pi / 4, pi, 1.0, 1.0);
  const double lib = normalization(anti) * m_D(hg_mode_signal(anti), Poisson{});
  const double limit_gap = std::abs(lib - 2.0);
  const bool pass = single <= 1e-9 && chi0_eps <= 1e-9 && chi0_md <= 1e-12 && limit_gap <= 1e-3 &&
                    rel(lib, oracle) <= 1e-9;
  return {pass, fmt("theta=0 max rel dev %.2e; chi=0 |norm eps - 1| %.2e, |M_D| %.2e; anti-phase norm M_D %.9f "
                    "(series %.9f, |.-2| %.2e tol 1e-3)",
                    single, chi0_eps, chi0_md, lib, oracle, limit_gap)};
}

ExperimentPlan c7_plan(const std::string& name, SourceStatistics st, double n_s, MeasurementBasis b, double chi,
                       EstimationMode mode) {
  ExperimentPlan p;
  p.name = name;
  p.scene = SourceScene::make(1.0, 1.0, pi / 4, std::acos(chi), 0.2, n_s);
  p.stats = st;
  p.basis = b;
  p.mu = 10000;
  p.trials = 1000;
  p.seed = 12345;
  p.mode = mode;
  return p;
}

Outcome c7_saturation() {
  const auto t0 = Clock::now();
  struct Kind {
    const char* name;
    SourceStatistics st;
    double n_s;
  };
  const Kind kinds[] = {{"poisson", Poisson{}, 10.0}, {"thermal", Thermal{}, 7.5}, {"fock", Fock{}, 10.0}};
  const std::pair<const char*, MeasurementBasis> bases[] = {{"hg", HermiteGauss{}}, {"di", DirectImagingGrid{}}};
  std::size_t runs = 0, bad = 0;
  double lo = 1e9, hi = 0, max_bias = 0;
  for (const auto& k : kinds)
    for (const auto& [bname, basis] : bases)
      for (double chi : {0.0, 0.5, -0.5})
        for (auto mode : {EstimationMode::known_ns, EstimationMode::unknown_ns}) {
          const auto name = std::string(k.name) + "/" + bname + "/chi=" + fmt("%+.1f", chi) + "/" + mode_name(mode);
          const auto r = run_experiment(c7_plan(name, k.st, k.n_s, basis, chi, mode), workers());
          const bool ok = r.ratio >= 0.9 && r.ratio <= 1.1;
          ++runs;
          bad += !ok;
          lo = std::min(lo, r.ratio);
          hi = std::max(hi, r.ratio);
          max_bias = std::max(max_bias, std::abs(r.bias_z));
          std::printf("    %-34s ratio %.4f  z %+.2f  bias_z %+.2f%s\n", name.c_str(), r.ratio, r.z_score, r.bias_z,
                      ok ? "" : "  <-- outside [0.9, 1.1]");
        }
  const double t = seconds_since(t0);
  return {bad == 0 && t < 600.0, fmt("%zu runs, seed 12345, ratio range [%.4f, %.4f], %zu outside [0.9, 1.1], max |bias_z| %.2f, %.1f s (limit 600 s)",
                                     runs, lo, hi, bad, max_bias, t)};
}

Outcome c8_ordering() {
  const auto scene = SourceScene::make(3.0, 1.0, pi / 4, pi, 0.5, 10.0);
  const std::pair<const char*, SourceStatistics> kinds[] = {{"fock", Fock{}}, {"poisson", Poisson{}}, {"thermal", Thermal{}}};
  std::vector<EstimationResult> r;
  std::vector<double> md;
  for (const auto& [name, st] : kinds) {
    ExperimentPlan p;
    p.name = name;
    p.scene = scene;
    p.stats = st;
    p.basis = HermiteGauss{};
    p.mu = 10000;
    p.trials = 2000;
    p.seed = 8;
    p.mode = EstimationMode::known_ns;
    r.push_back(run_experiment(p, workers()));
    md.push_back(total_report(scene, st, HermiteGauss{}).normalized.d);
    std::printf("    %-8s var %.4e +- %.1e  normalized M_d %.4f\n", name, r.back().d_hat_var, r.back().d_hat_var_se,
                md.back());
  }
  bool pass = true;
  std::string detail;
  for (int i = 0; i < 2; ++i) {
    const double sep = (r[i + 1].d_hat_var - r[i].d_hat_var) / std::hypot(r[i].d_hat_var_se, r[i + 1].d_hat_var_se);
    const bool needs_gap = md[i] > 1.1 * md[i + 1];
    const bool ok = r[i].d_hat_var <= r[i + 1].d_hat_var && (!needs_gap || sep > 3.0);
    pass = pass && ok;
    detail += fmt("%s%s < %s by %.1f SE", i ? ", " : "", kinds[i].first, kinds[i + 1].first, sep);
  }
  return {pass, detail + " (required > 3 SE where M_d differs > 10%)"};
}

Outcome c9_determinism() {
  std::vector<ExperimentPlan> plans;
  plans.push_back(c7_plan("thermal_hg", Thermal{}, 7.5, HermiteGauss{}, 0.5, EstimationMode::unknown_ns));
  plans.push_back(c7_plan("fock_di", Fock{}, 10.0, DirectImagingGrid{0.0, 65}, -0.5, EstimationMode::known_ns));
  for (auto& p : plans) p.trials = 300;
  const unsigned n = std::max(4u, workers());
  auto mc_csv = [&](unsigned w) {
    std::ostringstream os;
    csv::write_montecarlo(os, plans, bound_comparison_sweep(plans, w));
    return os.str();
  };
  auto cfg = config::load(std::string(COHSEP_PRESET_DIR) + "/fig7.ini");
  cfg.sweep->points = 40;
  auto sweep_csv = [&](unsigned w) {
    std::ostringstream os;
    write_sweep_csv(os, cfg, run_sweep(cfg, w));
    return os.str();
  };
  const bool mc = mc_csv(1) == mc_csv(n);
  const bool sw = sweep_csv(1) == sweep_csv(n);
  return {mc && sw, fmt("montecarlo csv %s, sweep csv %s (1 vs %u workers)", mc ? "identical" : "DIFFERS",
                        sw ? "identical" : "DIFFERS", n)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"1 closed-form cross-check", c1_closed_form}, {"2 HG convergence", c2_hg_convergence},
      {"3 HG vs DI theorem grid", c3_theorem},       {"4 M0 identity", c4_m0_identity},
      {"5 algebraic identities", c5_algebra},        {"6 known limits", c6_limits},
      {"7 Monte-Carlo saturation", c7_saturation},   {"8 statistics ordering", c8_ordering},
      {"9 determinism", c9_determinism}};
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s criterion %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.summary.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed;
}
