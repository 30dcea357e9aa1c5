#pragma once

// Seeded photon-counting simulation and the locally unbiased linear
// estimator whose variance the moment-based bound predicts.
//
// Seeding rule: trial t of a run with seed s draws from
// std::mt19937_64(sub_seed(s, t)), sub_seed = splitmix64(s + (t + 1) * golden).
// Trial results are stored by index and reduced in index order, so output
// does not depend on the number of worker threads.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "cohsep/bases.hpp"
#include "cohsep/numeric.hpp"
#include "cohsep/optics.hpp"
#include "cohsep/sensitivity.hpp"
#include "cohsep/statistics.hpp"

namespace cohsep {

enum class EstimationMode { known_ns, unknown_ns };

inline std::string mode_name(EstimationMode m) {
  return m == EstimationMode::known_ns ? "known_ns" : "unknown_ns";
}

struct ExperimentPlan {
  std::string name;
  SourceScene scene = SourceScene::make(1.0, 1.0, numeric::pi / 4, numeric::pi / 2, 1.0, 1.0);
  SourceStatistics stats = Poisson{};
  MeasurementBasis basis = HermiteGauss{};
  std::int64_t mu = 10000;
  std::int64_t trials = 1000;
  std::uint64_t seed = 1;
  EstimationMode mode = EstimationMode::known_ns;
  /// Extra estimation steps re-linearized at the current estimate (0: purely
  /// local estimator at the true parameters).
  int relinearize = 0;
};

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;   // unbiased
  double mean_se = 0.0;
  double variance_se = 0.0;
};

/// Two-pass moments in index order; the variance standard error uses the
/// sample fourth central moment.
inline SampleMoments sample_moments(std::span<const double> xs) {
  SampleMoments out;
  const double n = static_cast<double>(xs.size());
  if (xs.size() < 2) return out;
  out.mean = numeric::pairwise_sum(xs) / n;
  std::vector<double> sq(xs.size()), quad(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dev = xs[i] - out.mean;
    sq[i] = dev * dev;
    quad[i] = sq[i] * sq[i];
  }
  const double m2 = numeric::pairwise_sum(sq) / n;
  const double m4 = numeric::pairwise_sum(quad) / n;
  out.variance = m2 * n / (n - 1.0);
  out.mean_se = std::sqrt(out.variance / n);
  out.variance_se = std::sqrt(std::max(0.0, m4 - m2 * m2 * (n - 3.0) / (n - 1.0)) / n);
  return out;
}

struct EstimationResult {
  std::string plan;
  EstimationMode mode = EstimationMode::known_ns;
  std::uint64_t seed = 0;
  std::int64_t mu = 0;
  std::int64_t trials = 0;
  double d_true = 0.0;
  double d_hat_mean = 0.0;
  double d_hat_var = 0.0;
  double d_hat_var_se = 0.0;
  double bias_z = 0.0;            // (mean - d0) / standard error of the mean
  double sensitivity = 0.0;       // M_d (known) or N_D M_eps (unknown), one repetition
  double predicted_bound = 0.0;   // 1 / (mu M)
  double ratio = 0.0;             // d_hat_var / predicted_bound = mu M var
  double z_score = 0.0;           // (d_hat_var - predicted_bound) / se
  SampleMoments n_d_empirical;    // per repetition
  double n_d_predicted = 0.0;
  double var_n_d_predicted = 0.0;
  std::vector<std::string> warnings;
};

/// Runs fn(i) for i in [0, n) on `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

/// Weights of the linear estimator d_hat = d0 + sum_m w_m (X_m - N_m).
struct LinearEstimator {
  std::vector<double> weights;
  std::vector<double> ns_weights;  // N_S row, unknown_ns only
  double sensitivity = 0.0;        // 1 / variance of one repetition
};

inline LinearEstimator make_estimator(const ModeSignal& signal, const SourceStatistics& stats,
                                      EstimationMode mode) {
  const double c = rank_one_coupling(bunching(signal, stats), signal.total);
  const std::size_t k = signal.size();
  // (Gamma^-1 dN/dq)_m = dN_m/dq / N_m - c dN_D/dq
  std::vector<double> gd(k, 0.0), gn(k, 0.0);
  for (std::size_t m = 0; m < k; ++m) {
    if (signal.means[m] < kVanishingMean) continue;
    gd[m] = signal.d_derivs[m] / signal.means[m] - c * signal.total_d_deriv;
    gn[m] = signal.ns_derivs[m] / signal.means[m] - c * signal.total_ns_deriv;
  }
  LinearEstimator est;
  est.weights.resize(k);
  if (mode == EstimationMode::known_ns) {
    const std::array p{Parameter::separation};
    const double md = sensitivity_matrix(signal, stats, p)(0, 0);
    if (!(md > 0.0)) throw singular_matrix("separation sensitivity is zero");
    for (std::size_t m = 0; m < k; ++m) est.weights[m] = gd[m] / md;
    est.sensitivity = md;
  } else {
    if (k < 2)
      throw singular_matrix("a single mode cannot estimate d with N_S unknown (M_eps = 0)");
    const std::array p{Parameter::separation, Parameter::photon_number};
    const auto m2 = sensitivity_matrix(signal, stats, p);
    const auto inv = invert_2x2({{{m2(0, 0), m2(0, 1)}, {m2(1, 0), m2(1, 1)}}});
    est.ns_weights.resize(k);
    for (std::size_t m = 0; m < k; ++m) {
      est.weights[m] = inv[0][0] * gd[m] + inv[0][1] * gn[m];
      est.ns_weights[m] = inv[1][0] * gd[m] + inv[1][1] * gn[m];
    }
    est.sensitivity = 1.0 / inv[0][0];
  }
  return est;
}

namespace detail {

inline double apply_weights(std::span<const double> w, std::span<const double> xbar,
                            std::span<const double> means) {
  std::vector<double> terms(w.size());
  for (std::size_t m = 0; m < w.size(); ++m) terms[m] = w[m] * (xbar[m] - means[m]);
  return numeric::pairwise_sum(terms);
}

/// Re-linearizes the estimator at the current estimate `steps` times. A step
/// that leaves the parameter domain ends the iteration.
inline double relinearized_estimate(const ExperimentPlan& plan, std::span<const double> xbar,
                                    double d_hat, double ns_hat) {
  for (int k = 0; k < plan.relinearize; ++k) {
    try {
      const double d0 = std::max(std::abs(d_hat), 1e-6 * plan.scene.sigma());
      const double n0 = plan.mode == EstimationMode::unknown_ns ? ns_hat : plan.scene.n_s();
      const SourceScene at = plan.scene.with_d(d0).with_n_s(n0);
      const ModeSignal sig = make_signal(at, plan.basis);
      const LinearEstimator est = make_estimator(sig, plan.stats, plan.mode);
      const double next_d = d0 + apply_weights(est.weights, xbar, sig.means);
      if (plan.mode == EstimationMode::unknown_ns) {
        const double next_n = n0 + apply_weights(est.ns_weights, xbar, sig.means);
        if (!(next_n > 0.0)) break;
        ns_hat = next_n;
      }
      if (!std::isfinite(next_d)) break;
      d_hat = next_d;
    } catch (const std::exception&) {
      break;
    }
  }
  return d_hat;
}

}  // namespace detail

inline EstimationResult run_experiment(const ExperimentPlan& plan, unsigned workers = 1) {
  if (plan.mu < 1 || plan.trials < 1) throw domain_error("experiment plan: mu and trials must be >= 1");
  const auto& scene = plan.scene;
  const ModeSignal signal = make_signal(scene, plan.basis);
  const std::vector<double> probs = detection_probabilities(signal);
  check_probabilities(probs);
  const LinearEstimator est = make_estimator(signal, plan.stats, plan.mode);
  const double mu = static_cast<double>(plan.mu);
  const std::size_t trials = static_cast<std::size_t>(plan.trials);

  std::vector<double> d_hat(trials), n_d(trials);
  parallel_for(trials, workers, [&](std::size_t t) {
    Rng rng(numeric::sub_seed(plan.seed, t));
    const std::int64_t emitted = sample_emitted_total(plan.stats, scene.n_s(), plan.mu, rng);
    const auto counts = sample_mode_counts(emitted, probs, rng);
    std::vector<double> xbar(counts.size());
    std::int64_t detected = 0;
    for (std::size_t m = 0; m < counts.size(); ++m) {
      xbar[m] = static_cast<double>(counts[m]) / mu;
      detected += counts[m];
    }
    d_hat[t] = scene.d() + detail::apply_weights(est.weights, xbar, signal.means);
    if (plan.relinearize > 0) {
      const double ns_hat = est.ns_weights.empty()
                                ? scene.n_s()
                                : scene.n_s() + detail::apply_weights(est.ns_weights, xbar, signal.means);
      d_hat[t] = detail::relinearized_estimate(plan, xbar, d_hat[t], ns_hat);
    }
    n_d[t] = static_cast<double>(detected) / mu;
  });

  EstimationResult r;
  r.plan = plan.name;
  r.mode = plan.mode;
  r.seed = plan.seed;
  r.mu = plan.mu;
  r.trials = plan.trials;
  r.d_true = scene.d();
  const auto dm = sample_moments(d_hat);
  r.d_hat_mean = dm.mean;
  r.d_hat_var = dm.variance;
  r.d_hat_var_se = dm.variance_se;
  r.bias_z = dm.mean_se > 0.0 ? (dm.mean - scene.d()) / dm.mean_se : 0.0;
  r.sensitivity = est.sensitivity;
  r.predicted_bound = 1.0 / (mu * est.sensitivity);
  r.ratio = dm.variance / r.predicted_bound;
  r.z_score = dm.variance_se > 0.0 ? (dm.variance - r.predicted_bound) / dm.variance_se : 0.0;
  // per-repetition N_D: the trial mean over mu repetitions has variance var/mu
  auto nm = sample_moments(n_d);
  nm.variance *= mu;
  nm.variance_se *= mu;
  r.n_d_empirical = nm;
  r.n_d_predicted = signal.total;
  r.var_n_d_predicted = total_count_variance(signal, plan.stats);
  r.warnings = signal.warnings;
  for (auto& w : statistics_warnings(scene, plan.stats)) r.warnings.push_back(std::move(w));
  return r;
}

/// One result per plan, in plan order.
inline std::vector<EstimationResult> bound_comparison_sweep(std::span<const ExperimentPlan> plans,
                                                            unsigned workers = 1) {
  std::vector<EstimationResult> out;
  out.reserve(plans.size());
  for (const auto& p : plans) out.push_back(run_experiment(p, workers));
  return out;
}

}  // namespace cohsep
