#pragma once

// Method-of-moments sensitivity of photon counting in an arbitrary set of
// measurement modes, for sources sharing a single principal mode.
//
// The count covariance is a diagonal plus a rank-one term,
//   Gamma = diag(N) + h N N^T,
// so its inverse is available in closed form (Sherman-Morrison) and the
// sensitivity matrix splits into a relative-intensity part that depends only
// on the basis and a total-photon-number part that depends only on the source
// statistics:
//   M = N_D sum_m (1/eps_m) d eps_m d eps_m^T + (1 / var N_D) dN_D dN_D^T.

#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "cohsep/bases.hpp"
#include "cohsep/numeric.hpp"
#include "cohsep/optics.hpp"
#include "cohsep/statistics.hpp"

namespace cohsep {

/// Square row-major matrix.
class DenseMatrix {
 public:
  DenseMatrix() = default;
  explicit DenseMatrix(std::size_t n) : n_(n), data_(n * n, 0.0) {}

  std::size_t size() const { return n_; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * n_ + j]; }

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

/// Modes with a mean below this are excluded from ratio forms.
inline constexpr double kVanishingMean = 1e-300;

enum class Parameter { separation, photon_number };

inline double bunching(const ModeSignal& signal, const SourceStatistics& stats) {
  return h_param(stats, signal.n_s);
}

/// Gamma_mn = delta_mn N_m + h N_m N_n.
inline DenseMatrix covariance(const ModeSignal& signal, const SourceStatistics& stats) {
  const double h = bunching(signal, stats);
  const std::size_t k = signal.size();
  DenseMatrix g(k);
  for (std::size_t m = 0; m < k; ++m) {
    if (signal.means[m] < 0.0) throw domain_error("covariance: negative mean count");
    for (std::size_t n = 0; n < k; ++n) g(m, n) = h * signal.means[m] * signal.means[n];
    g(m, m) += signal.means[m];
  }
  return g;
}

/// h / (1 + h N_D), the rank-one coupling of the Sherman-Morrison inverse.
inline double rank_one_coupling(double h, double n_d) {
  const double denom = 1.0 + h * n_d;
  if (!(denom > 0.0))
    throw singular_matrix("count covariance is singular: 1 + h N_D = " + std::to_string(denom) +
                          " (e.g. bucket detection of a lossless Fock state)");
  return h / denom;
}

/// (Gamma^-1)_mn = delta_mn / N_m - h / (1 + h N_D).
inline DenseMatrix covariance_inverse(const ModeSignal& signal, const SourceStatistics& stats) {
  const double c = rank_one_coupling(bunching(signal, stats), signal.total);
  const std::size_t k = signal.size();
  DenseMatrix inv(k);
  for (std::size_t m = 0; m < k; ++m) {
    if (!(signal.means[m] > 0.0))
      throw domain_error("covariance_inverse: mode " + std::to_string(m) + " has zero mean count");
    for (std::size_t n = 0; n < k; ++n) inv(m, n) = -c;
    inv(m, m) += 1.0 / signal.means[m];
  }
  return inv;
}

namespace detail {

inline const std::vector<double>& derivs_for(const ModeSignal& s, Parameter p) {
  return p == Parameter::separation ? s.d_derivs : s.ns_derivs;
}

inline double total_deriv(const ModeSignal& s, Parameter p) {
  return p == Parameter::separation ? s.total_d_deriv : s.total_ns_deriv;
}

/// d sqrt(N_m) / dq, from the analytic amplitude derivative when available.
inline double amp_deriv(const ModeSignal& s, std::size_t m, Parameter p) {
  if (p == Parameter::separation && !s.amp_d_derivs.empty()) return s.amp_d_derivs[m];
  const double n = s.means[m];
  if (n < kVanishingMean) return 0.0;
  return derivs_for(s, p)[m] / (2.0 * std::sqrt(n));
}

/// d sqrt(eps_m) / dq = d sqrt(N_m)/sqrt(N_D) - sqrt(N_m) dN_D / (2 N_D^{3/2}).
inline double sqrt_eps_deriv(const ModeSignal& s, std::size_t m, Parameter p) {
  const double nd = s.total;
  return amp_deriv(s, m, p) / std::sqrt(nd) -
         std::sqrt(std::max(s.means[m], 0.0)) * total_deriv(s, p) / (2.0 * nd * std::sqrt(nd));
}

}  // namespace detail

/// M_ab = sum_mn (Gamma^-1)_mn dN_m/dq_a dN_n/dq_b, with the Sherman-Morrison
/// inverse summed in closed form:
///   sum_m dN_m dN_m / N_m - h/(1 + h N_D) dN_D dN_D.
/// Vanishing modes enter through 4 d sqrt(N_m) d sqrt(N_m).
inline DenseMatrix sensitivity_matrix(const ModeSignal& signal, const SourceStatistics& stats,
                                      std::span<const Parameter> params) {
  const double c = rank_one_coupling(bunching(signal, stats), signal.total);
  const std::size_t k = params.size();
  DenseMatrix out(k);
  std::vector<double> terms(signal.size());
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      const auto& da = detail::derivs_for(signal, params[a]);
      const auto& db = detail::derivs_for(signal, params[b]);
      for (std::size_t m = 0; m < signal.size(); ++m) {
        const double n = signal.means[m];
        if (n >= kVanishingMean && signal.amp_d_derivs.empty())
          terms[m] = da[m] * (db[m] / n);
        else
          terms[m] = 4.0 * detail::amp_deriv(signal, m, params[a]) *
                     detail::amp_deriv(signal, m, params[b]);
      }
      const double v = numeric::pairwise_sum(terms) -
                       c * detail::total_deriv(signal, params[a]) * detail::total_deriv(signal, params[b]);
      out(a, b) = v;
      out(b, a) = v;
    }
  }
  return out;
}

/// Variance of the total detected photon number, N_D (1 + h N_D).
inline double total_count_variance(const ModeSignal& signal, const SourceStatistics& stats) {
  const double v = signal.total * (1.0 + bunching(signal, stats) * signal.total);
  if (!(v > 0.0))
    throw singular_matrix("total photon number has zero variance: " + std::to_string(v));
  return v;
}

/// Relative-intensity route, written with 4 (d sqrt eps_m)^2 per mode so
/// that modes vanishing together with their derivative contribute 0, not 0/0:
///   M_ab = N_D sum_m 4 d_a sqrt(eps_m) d_b sqrt(eps_m) + d_a N_D d_b N_D / var N_D.
inline DenseMatrix sensitivity_matrix_decomposed(const ModeSignal& signal,
                                                 const SourceStatistics& stats,
                                                 std::span<const Parameter> params) {
  const double var = total_count_variance(signal, stats);
  const std::size_t k = params.size();
  DenseMatrix out(k);
  std::vector<double> terms(signal.size());
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = a; b < k; ++b) {
      double eps_part = 0.0;
      if (signal.size() > 1) {
        for (std::size_t m = 0; m < signal.size(); ++m)
          terms[m] = 4.0 * detail::sqrt_eps_deriv(signal, m, params[a]) *
                     detail::sqrt_eps_deriv(signal, m, params[b]);
        eps_part = signal.total * numeric::pairwise_sum(terms);
      }
      const double v = eps_part + detail::total_deriv(signal, params[a]) *
                                      detail::total_deriv(signal, params[b]) / var;
      out(a, b) = v;
      out(b, a) = v;
    }
  }
  return out;
}

/// M_eps = sum_m (1/eps_m) (d eps_m / dd)^2, per detected photon. A single
/// mode carries no relative-intensity information (eps_0 = 1).
inline double m_eps(const ModeSignal& signal) {
  if (signal.size() <= 1) return 0.0;
  std::vector<double> terms(signal.size());
  for (std::size_t m = 0; m < signal.size(); ++m) {
    const double v = detail::sqrt_eps_deriv(signal, m, Parameter::separation);
    terms[m] = 4.0 * v * v;
  }
  return numeric::pairwise_sum(terms);
}

/// M_D = (dN_D/dd)^2 / var N_D.
inline double m_D(const ModeSignal& signal, const SourceStatistics& stats) {
  return signal.total_d_deriv * signal.total_d_deriv / total_count_variance(signal, stats);
}

/// M_0 = sum_m (1/N_m) (dN_m/dd)^2; M_d = M_0 - h/(1 + h N_D) (dN_D/dd)^2.
inline double m0_from_signal(const ModeSignal& signal) {
  std::vector<double> terms(signal.size());
  for (std::size_t m = 0; m < signal.size(); ++m) {
    const double a = detail::amp_deriv(signal, m, Parameter::separation);
    terms[m] = 4.0 * a * a;
  }
  return numeric::pairwise_sum(terms);
}

// ---------------------------------------------------------------------------
// Closed forms

/// 1 - chi delta without cancellation at chi -> 1, d -> 0.
inline double one_minus_chi_delta(double chi, double d, double sigma) {
  return (1.0 - chi) - chi * std::expm1(-d * d / (8.0 * sigma * sigma));
}

/// Infinite-basis HG sensitivity per detected photon. Summing the HG series
/// with Poisson moment identities gives
///   N_D M_eps / (kappa N_S) = (1/4 sigma^2) (1 - chi delta + (d^2/4 sigma^2) chi delta / (1 + chi delta)),
/// so M_eps itself carries an extra 1 / (1 + chi delta).
inline double sinh_minus_identity(double u) {
  if (std::abs(u) < 1e-2) {
    const double u2 = u * u;
    return u * u2 / 6.0 * (1.0 + u2 / 20.0 * (1.0 + u2 / 42.0));
  }
  return std::sinh(u) - u;
}

inline double m_eps_closed_hg_per_transmitted(const SourceScene& s) {
  require_not_dark(s, "m_eps_closed_hg");
  const double chi = scene_chi(s);
  const double sigma = s.sigma(), d = s.d();
  const double u = d * d / (8.0 * sigma * sigma);
  const double delta = std::exp(-u);
  const double plus = one_plus_chi_delta(chi, d, sigma);
  // bracket = (1 - chi^2 delta^2 + 2 u chi delta) / (1 + chi delta), with the
  // numerator regrouped into non-negative terms for either sign of chi.
  double numerator;
  if (chi >= 0.0) {
    numerator = one_minus_chi_delta(chi, d, sigma) * plus + 2.0 * u * chi * delta;
  } else {
    const double a = -chi;
    numerator = (1.0 - a) * (1.0 + a * delta * delta) + 2.0 * a * delta * sinh_minus_identity(u);
  }
  return numerator / plus / (4.0 * sigma * sigma);
}

inline double m_eps_closed_hg(const SourceScene& s) {
  return m_eps_closed_hg_per_transmitted(s) / one_plus_chi_delta(scene_chi(s), s.d(), s.sigma());
}

/// DI sensitivity per detected photon where it is known in closed form:
/// in-phase, anti-phase, or a single source (theta = 0).
inline double m_eps_closed_di(const SourceScene& s) {
  if (!s.real_field())
    throw unsupported_case("m_eps_closed_di: closed form exists only for phi in {0, pi} or theta = 0;"
                           " use m_eps_quadrature_di");
  if (s.theta() == 0.0) return 1.0 / (4.0 * s.sigma() * s.sigma());
  return m_eps_closed_hg(s);
}

/// M_0 for the complete HG basis, N_D M_eps + (dN_D/dd)^2 / N_D.
inline double m0_closed_hg(const SourceScene& s) {
  const double nd = total_detected(s);
  const double dnd = total_detected_d_deriv(s);
  return nd * m_eps_closed_hg(s) + dnd * dnd / nd;
}

/// M_D = (kappa N_S / 4 sigma^2) delta^2 chi^2 / ((1 + delta chi) + h kappa N_S (1 + delta chi)^2)
///       * (d / 2 sigma)^2.
inline double m_D_explicit(const SourceScene& s, const SourceStatistics& stats) {
  require_not_dark(s, "m_D_explicit");
  const double chi = scene_chi(s);
  const double sigma = s.sigma(), d = s.d();
  const double delta = compute_delta(d, sigma);
  const double a = one_plus_chi_delta(chi, d, sigma);
  const double kn = s.kappa() * s.n_s();
  const double h = h_param(stats, s.n_s());
  const double denom = a + h * kn * a * a;
  if (!(denom > 0.0)) throw singular_matrix("m_D_explicit: total photon number has zero variance");
  const double r = d / (2.0 * sigma);
  return kn / (4.0 * sigma * sigma) * delta * delta * chi * chi / denom * r * r;
}

// ---------------------------------------------------------------------------
// Continuous direct imaging by quadrature
//
// u0(x, y) = g(x) g(y) and every intensity term shares g(y)^2, whose integral
// is 1, so plane integrals reduce exactly to integrals over x of the field
// E(x) = cos(theta) g(x + d/2) + e^{i phi} sin(theta) g(x - d/2).

struct QuadratureOptions {
  double half_width_sigmas = 12.0;  // beyond d/2 on each side
  double rel_tol = 1e-13;
  std::size_t initial_intervals = 512;
  std::size_t max_intervals = std::size_t{1} << 20;
};

struct QuadratureValue {
  double value = 0.0;
  double error = 0.0;
  std::size_t intervals = 0;
};

namespace detail {

struct FieldSample {
  double re, im, re_d, im_d;  // E and dE/dd, per sqrt(kappa N_S)
  double re_mag, re_d_mag;    // sums of |terms| behind re and re_d
};

inline FieldSample field_1d(const SourceScene& s, double x) {
  const double sigma = s.sigma(), d = s.d();
  const double u1 = x + 0.5 * d, u2 = x - 0.5 * d;
  const double g1 = psf_1d(u1, sigma), g2 = psf_1d(u2, sigma);
  // d g(x + d/2)/dd = -(u1 / 4 sigma^2) g1 ; d g(x - d/2)/dd = (u2 / 4 sigma^2) g2
  const double g1_d = -u1 / (4.0 * sigma * sigma) * g1;
  const double g2_d = u2 / (4.0 * sigma * sigma) * g2;
  const double c = std::cos(s.theta()), sn = std::sin(s.theta());
  const double cp = s.cos_phi(), sp = s.sin_phi();
  return {c * g1 + cp * sn * g2, sp * sn * g2, c * g1_d + cp * sn * g2_d, sp * sn * g2_d,
          std::abs(c * g1) + std::abs(cp * sn * g2), std::abs(c * g1_d) + std::abs(cp * sn * g2_d)};
}

/// `noise` bounds the rounding error of `f` pointwise; its integral sets the
/// absolute tolerance, so integrands formed by cancellation still converge.
inline QuadratureValue integrate_x(const SourceScene& s, const QuadratureOptions& opt,
                                   const std::function<double(double)>& f,
                                   const std::function<double(double)>& noise = {}) {
  const double lim = 0.5 * s.d() + opt.half_width_sigmas * s.sigma();
  double floor = 1e-300;
  if (noise) {
    const std::size_t n = opt.initial_intervals;
    const double h = 2.0 * lim / static_cast<double>(n);
    double acc = 0.0;
    for (std::size_t i = 0; i <= n; ++i) acc += noise(-lim + h * static_cast<double>(i));
    floor = std::max(floor, 64.0 * std::numeric_limits<double>::epsilon() * acc * h);
  }
  const auto r = numeric::adaptive_trapezoid(f, -lim, lim, opt.rel_tol, floor,
                                             opt.initial_intervals, opt.max_intervals);
  return {r.value, std::max(r.error, floor), r.intervals};
}

}  // namespace detail

/// Continuous-limit DI sensitivity per detected photon,
///   int (1/i) (di/dd)^2 dr,  i = I / N_D,
/// evaluated as int 4 (d|E|/dd - |E| c)^2 / n_D dx with c = n_D' / 2 n_D.
inline QuadratureValue m_eps_quadrature_di(const SourceScene& s, const QuadratureOptions& opt = {}) {
  require_not_dark(s, "m_eps_quadrature_di");
  const double chi = scene_chi(s);
  const double nd = one_plus_chi_delta(chi, s.d(), s.sigma());
  const double cc = chi * delta_d_deriv(s.d(), s.sigma()) / (2.0 * nd);
  const bool real = s.real_field();
  // q^2 is the integrand up to 4 / n_D; q_mag bounds the terms cancelling in q
  auto parts = [&](double x) -> std::pair<double, double> {
    const auto e = detail::field_1d(s, x);
    const double ur = e.re_d - e.re * cc;
    const double mr = e.re_d_mag + e.re_mag * std::abs(cc);
    if (real) return {ur, mr};
    const double ui = e.im_d - e.im * cc;
    const double mi = std::abs(e.im_d) + std::abs(e.im * cc);
    const double den = e.re * e.re + e.im * e.im;
    if (den < 1e-300) return {std::hypot(ur, ui), mr + mi};
    const double a = std::sqrt(den);
    return {(e.re * ur + e.im * ui) / a, (std::abs(e.re) * mr + std::abs(e.im) * mi) / a};
  };
  auto integrand = [&](double x) {
    const double q = parts(x).first;
    return 4.0 * q * q / nd;
  };
  auto noise = [&](double x) {
    const auto [q, mag] = parts(x);
    return 8.0 * std::abs(q) * mag / nd;
  };
  auto r = detail::integrate_x(s, opt, integrand, noise);
  r.error += 1e-15 * std::abs(r.value);  // floor at rounding level
  return r;
}

/// Continuous-limit DI M_0 = int (1/I) (dI/dd)^2 dr.
inline QuadratureValue m0_quadrature_di(const SourceScene& s, const QuadratureOptions& opt = {}) {
  require_not_dark(s, "m0_quadrature_di");
  const bool real = s.real_field();
  auto integrand = [&](double x) {
    const auto e = detail::field_1d(s, x);
    if (real) return 4.0 * e.re_d * e.re_d;
    const double den = e.re * e.re + e.im * e.im;
    if (den < 1e-300) return 4.0 * (e.re_d * e.re_d + e.im_d * e.im_d);
    const double num = e.re * e.re_d + e.im * e.im_d;
    return 4.0 * num * num / den;
  };
  auto r = detail::integrate_x(s, opt, integrand);
  const double kn = s.kappa() * s.n_s();
  return {kn * r.value, kn * r.error + 1e-15 * kn * std::abs(r.value), r.intervals};
}

/// The in-phase (phi = 0) or anti-phase (phi = pi) scene with the same chi:
/// sin 2 theta_1 = |sin 2 theta cos phi|. For cos phi < 0 the equivalent
/// scene has phi = pi, which is the theta_1 < 0 branch written with theta_1 >= 0.
inline SourceScene equivalent_real_scene(const SourceScene& s) {
  const double chi = scene_chi(s);
  const double theta1 = 0.5 * std::asin(std::min(1.0, std::abs(chi)));
  return s.with_theta(theta1).with_phi(chi < 0.0 ? numeric::pi : 0.0);
}

// ---------------------------------------------------------------------------
// Report

struct NormalizedSensitivity {
  double eps = 0.0;
  double D = 0.0;
  double d = 0.0;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

struct SensitivityReport {
  double n_d = 0.0;         // detected photons captured by the basis
  double var_n_d = 0.0;
  double h = 0.0;
  std::size_t modes = 0;
  double truncation_error = 0.0;
  double m_eps = 0.0;       // per detected photon, 1/length^2
  double m_D = 0.0;         // 1/length^2
  double m_d = 0.0;         // 1/length^2
  std::array<std::array<double, 2>, 2> two_param{};  // rows/cols (d, N_S)
  double bound_known_ns = kInfinity;    // length^2, one repetition
  double bound_unknown_ns = kInfinity;  // length^2, one repetition
  NormalizedSensitivity normalized;
  std::vector<std::string> warnings;
};

/// 4 sigma^2 / kappa / N_S, the per-emitted-photon normalization.
inline double normalization(const SourceScene& s) {
  return 4.0 * s.sigma() * s.sigma() / (s.kappa() * s.n_s());
}

inline std::vector<std::string> statistics_warnings(const SourceScene& s,
                                                    const SourceStatistics& stats) {
  std::vector<std::string> w;
  if (std::holds_alternative<Fock>(stats) && s.kappa() > 0.3)
    w.push_back("Fock statistics with kappa > 0.3: the linear loss model assumes kappa << 1");
  if (detected_variance(s, stats).non_physical)
    w.push_back("1 + h N_D < 0: the scene is non-physical for these statistics");
  return w;
}

inline SensitivityReport report_from_signal(const SourceScene& s, const SourceStatistics& stats,
                                            const ModeSignal& signal) {
  SensitivityReport r;
  r.n_d = signal.total;
  r.h = bunching(signal, stats);
  r.var_n_d = total_count_variance(signal, stats);
  r.modes = signal.size();
  r.truncation_error = signal.truncation_error;
  r.m_eps = m_eps(signal);
  r.m_D = m_D(signal, stats);
  r.m_d = r.n_d * r.m_eps + r.m_D;
  const std::array params{Parameter::separation, Parameter::photon_number};
  const auto m = sensitivity_matrix_decomposed(signal, stats, params);
  r.two_param = {{{m(0, 0), m(0, 1)}, {m(1, 0), m(1, 1)}}};
  r.bound_known_ns = r.m_d > 0.0 ? 1.0 / r.m_d : kInfinity;
  r.bound_unknown_ns = r.m_eps > 0.0 ? 1.0 / (r.n_d * r.m_eps) : kInfinity;
  const double norm = normalization(s);
  r.normalized.eps = norm * r.n_d * r.m_eps;
  r.normalized.D = norm * r.m_D;
  r.normalized.d = r.normalized.eps + r.normalized.D;
  r.warnings = signal.warnings;
  for (auto& w : statistics_warnings(s, stats)) r.warnings.push_back(std::move(w));
  return r;
}

inline SensitivityReport total_report(const SourceScene& s, const SourceStatistics& stats,
                                      const MeasurementBasis& basis) {
  return report_from_signal(s, stats, make_signal(s, basis));
}

/// M_0 in the requested basis.
inline double appendix_m0(const SourceScene& s, const MeasurementBasis& basis) {
  return m0_from_signal(make_signal(s, basis));
}

/// Inverse of a symmetric 2x2 matrix; singular when the determinant is
/// negligible against the product of the diagonal.
inline std::array<std::array<double, 2>, 2> invert_2x2(const std::array<std::array<double, 2>, 2>& m) {
  const double det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
  const double scale = std::abs(m[0][0] * m[1][1]) + std::abs(m[0][1] * m[1][0]);
  if (!(std::abs(det) > 1e-300) || std::abs(det) <= 1e-12 * scale)
    throw singular_matrix("two-parameter sensitivity matrix is singular (det = " +
                          std::to_string(det) + ")");
  return {{{m[1][1] / det, -m[0][1] / det}, {-m[1][0] / det, m[0][0] / det}}};
}

}  // namespace cohsep
