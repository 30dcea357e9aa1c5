#pragma once

// Measurement bases and the per-mode signal they produce: Hermite-Gauss
// demultiplexing (SPADE), pixelated direct imaging, and bucket detection.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "cohsep/numeric.hpp"
#include "cohsep/optics.hpp"

namespace cohsep {

/// HG modes 0 .. mode_count-1 of a basis aligned with the image centroid and
/// the source axis. No mode_count means automatic cutoff.
struct HermiteGauss {
  std::optional<int> mode_count;
};

/// Square pixel grid centred on the image centroid, covering
/// [-half_width, half_width] on both axes. half_width <= 0 selects the
/// default support 4 sigma + d/2.
struct DirectImagingGrid {
  double half_width = 0.0;
  int pixels_per_axis = 257;
};

struct Bucket {};

using MeasurementBasis = std::variant<HermiteGauss, DirectImagingGrid, Bucket>;

inline std::string basis_name(const MeasurementBasis& b) {
  if (std::holds_alternative<HermiteGauss>(b)) return "hg";
  if (std::holds_alternative<DirectImagingGrid>(b)) return "di";
  return "bucket";
}

/// Mean counts per measurement mode and their derivatives with respect to
/// the separation d and the emitted photon number N_S.
struct ModeSignal {
  std::vector<double> means;
  std::vector<double> epsilons;
  std::vector<double> d_derivs;
  std::vector<double> ns_derivs;
  /// d sqrt(N_m) / dd when the basis knows it analytically; finite where
  /// N_m vanishes together with its derivative. Empty otherwise.
  std::vector<double> amp_d_derivs;
  double total = 0.0;           // sum of means
  double total_d_deriv = 0.0;
  double total_ns_deriv = 0.0;
  double n_s = 0.0;
  /// Fraction of the image-plane photons not captured by the modes.
  double truncation_error = 0.0;
  std::vector<std::string> warnings;

  std::size_t size() const { return means.size(); }
};

/// Fills total*, epsilons from means and derivatives, in fixed summation order.
inline void finalize_signal(ModeSignal& s, double reference_total) {
  s.total = numeric::pairwise_sum(s.means);
  s.total_d_deriv = numeric::pairwise_sum(s.d_derivs);
  s.total_ns_deriv = numeric::pairwise_sum(s.ns_derivs);
  if (!(s.total > 0.0)) throw domain_error("mode signal: no detected photons (N_D = 0)");
  s.epsilons.resize(s.means.size());
  for (std::size_t m = 0; m < s.means.size(); ++m) s.epsilons[m] = s.means[m] / s.total;
  s.truncation_error = reference_total > 0.0 ? std::max(0.0, 1.0 - s.total / reference_total) : 0.0;
}

// ---------------------------------------------------------------------------
// Hermite-Gauss

/// beta_m(x0) = e^{-x0^2/2} x0^m / sqrt(m!), evaluated in log space.
inline double hg_beta(int m, double x0) {
  if (m < 0) throw domain_error("hg_beta: negative mode index");
  if (x0 == 0.0) return m == 0 ? 1.0 : 0.0;
  const double log_abs = -0.5 * x0 * x0 + m * std::log(std::abs(x0)) - 0.5 * std::lgamma(m + 1.0);
  const double v = std::exp(log_abs);
  return (x0 < 0.0 && (m % 2 == 1)) ? -v : v;
}

/// d beta_m / d x0 = e^{-x0^2/2} (m x0^{m-1} - x0^{m+1}) / sqrt(m!).
inline double hg_beta_deriv(int m, double x0) {
  if (m < 0) throw domain_error("hg_beta_deriv: negative mode index");
  const double tail = -x0 * hg_beta(m, x0);
  if (m == 0) return tail;
  // m x0^{m-1}/sqrt(m!) = sqrt(m) x0^{m-1}/sqrt((m-1)!)
  return std::sqrt(static_cast<double>(m)) * hg_beta(m - 1, x0) + tail;
}

/// Upper tail P(X > m_cut) of a Poisson(rate) variable, summed directly.
inline double poisson_upper_tail(double rate, int m_cut) {
  if (rate == 0.0) return 0.0;
  double tail = 0.0;
  for (int k = m_cut + 1; k < m_cut + 4000; ++k) {
    const double term = std::exp(-rate + k * std::log(rate) - std::lgamma(k + 1.0));
    tail += term;
    if (k > rate && term < 1e-30 * std::max(tail, 1e-300)) break;
  }
  return tail;
}

inline constexpr double kHgTailTarget = 1e-12;
inline constexpr int kHgGuardModes = 4;

/// Automatic HG cutoff: the smallest M whose Poisson((d/4 sigma)^2) tail
/// beyond M is below the target relative to the captured intensity, plus
/// guard modes. Returns a mode count (M + 1 + guard).
inline int hg_auto_mode_count(const SourceScene& s) {
  const double x0 = s.x() / 4.0;
  const double rate = x0 * x0;
  const double chi = scene_chi(s);
  // mode weights 1 +- chi are at most 2; relative to N_D / kappa N_S
  const double target = kHgTailTarget * one_plus_chi_delta(chi, s.d(), s.sigma()) / 2.0;
  int m = 0;
  while (poisson_upper_tail(rate, m) >= target) ++m;
  return m + 1 + kHgGuardModes;
}

inline int resolve_mode_count(const SourceScene& s, const HermiteGauss& hg) {
  if (!hg.mode_count) return hg_auto_mode_count(s);
  if (*hg.mode_count < 1) throw domain_error("HermiteGauss: mode count must be >= 1");
  return *hg.mode_count;
}

/// A_m = sqrt(kappa) ((-1)^m cos theta + e^{i phi} sin theta) beta_m(d / 4 sigma).
inline std::vector<std::complex<double>> hg_coefficients(const SourceScene& s, int mode_count) {
  if (mode_count < 1) throw domain_error("hg_coefficients: mode count must be >= 1");
  const double x0 = s.x() / 4.0;
  const std::complex<double> phase(s.cos_phi(), s.sin_phi());
  std::vector<std::complex<double>> a(static_cast<std::size_t>(mode_count));
  for (int m = 0; m < mode_count; ++m) {
    const double parity = (m % 2 == 0) ? 1.0 : -1.0;
    a[m] = std::sqrt(s.kappa()) * (parity * std::cos(s.theta()) + phase * std::sin(s.theta())) *
           hg_beta(m, x0);
  }
  return a;
}

inline ModeSignal hg_mode_signal(const SourceScene& s, const HermiteGauss& hg = {}) {
  require_not_dark(s, "hg_mode_signal");
  const int count = resolve_mode_count(s, hg);
  const double chi = scene_chi(s);
  const double x0 = s.x() / 4.0;
  const double kn = s.kappa() * s.n_s();

  ModeSignal out;
  out.n_s = s.n_s();
  out.means.resize(count);
  out.d_derivs.resize(count);
  out.ns_derivs.resize(count);
  out.amp_d_derivs.resize(count);
  for (int m = 0; m < count; ++m) {
    const double weight = (m % 2 == 0) ? 1.0 + chi : 1.0 - chi;
    const double scale = std::sqrt(kn * std::max(weight, 0.0));
    const double amp = scale * hg_beta(m, x0);
    const double amp_d = scale * hg_beta_deriv(m, x0) / (4.0 * s.sigma());
    out.means[m] = amp * amp;
    out.amp_d_derivs[m] = amp_d;
    out.d_derivs[m] = 2.0 * amp * amp_d;
    out.ns_derivs[m] = out.means[m] / s.n_s();
  }
  finalize_signal(out, total_detected(s));
  return out;
}

// ---------------------------------------------------------------------------
// Direct imaging

/// I(r) = kappa N_S |u0(r - r1) cos theta + e^{i phi} u0(r - r2) sin theta|^2.
inline double di_intensity(const SourceScene& s, Vec2 r) {
  const Vec2 r1 = s.r1(), r2 = s.r2();
  const double u1 = psf_amplitude({r.x - r1.x, r.y - r1.y}, s.sigma());
  const double u2 = psf_amplitude({r.x - r2.x, r.y - r2.y}, s.sigma());
  const double c = std::cos(s.theta()), sn = std::sin(s.theta());
  return s.kappa() * s.n_s() *
         (u1 * u1 * c * c + u2 * u2 * sn * sn + u1 * u2 * std::sin(2.0 * s.theta()) * s.cos_phi());
}

inline double default_di_half_width(const SourceScene& s) { return 4.0 * s.sigma() + 0.5 * s.d(); }

inline ModeSignal di_mode_signal(const SourceScene& s, const DirectImagingGrid& grid = {}) {
  require_not_dark(s, "di_mode_signal");
  if (grid.pixels_per_axis < 1) throw domain_error("DirectImagingGrid: pixels_per_axis must be >= 1");
  const double half_width = grid.half_width > 0.0 ? grid.half_width : default_di_half_width(s);
  const int p = grid.pixels_per_axis;
  const double pitch = 2.0 * half_width / p;
  const double sigma = s.sigma(), d = s.d();
  const double c2 = std::pow(std::cos(s.theta()), 2), s2 = std::pow(std::sin(s.theta()), 2);
  const double chi = scene_chi(s);
  const double delta = compute_delta(d, sigma);
  const double delta_d = delta_d_deriv(d, sigma);

  ModeSignal out;
  out.n_s = s.n_s();
  if (half_width < default_di_half_width(s) * (1.0 - 1e-12))
    out.warnings.push_back("grid half-width " + std::to_string(half_width) +
                           " is smaller than the support 4 sigma + d/2");
  if (pitch > sigma) out.warnings.push_back("pixel pitch exceeds sigma");

  // x profile: g(x)^2 is the N(0, sigma) density, g1 g2 = delta N(0, sigma).
  std::vector<double> xs(p), xs_d(p), ys(p);
  for (int i = 0; i < p; ++i) {
    const double a = -half_width + pitch * i;
    const double b = (i + 1 == p) ? half_width : a + pitch;
    const double p1 = numeric::normal_interval((a + 0.5 * d) / sigma, (b + 0.5 * d) / sigma);
    const double p2 = numeric::normal_interval((a - 0.5 * d) / sigma, (b - 0.5 * d) / sigma);
    const double p0 = numeric::normal_interval(a / sigma, b / sigma);
    const double p1_d = 0.5 / sigma *
                        (numeric::normal_pdf((b + 0.5 * d) / sigma) - numeric::normal_pdf((a + 0.5 * d) / sigma));
    const double p2_d = -0.5 / sigma *
                        (numeric::normal_pdf((b - 0.5 * d) / sigma) - numeric::normal_pdf((a - 0.5 * d) / sigma));
    xs[i] = std::max(0.0, c2 * p1 + s2 * p2 + chi * delta * p0);
    xs_d[i] = c2 * p1_d + s2 * p2_d + chi * delta_d * p0;
    ys[i] = p0;
  }

  const double kn = s.kappa() * s.n_s();
  const std::size_t count = static_cast<std::size_t>(p) * p;
  out.means.resize(count);
  out.d_derivs.resize(count);
  out.ns_derivs.resize(count);
  for (int j = 0; j < p; ++j) {
    for (int i = 0; i < p; ++i) {
      const std::size_t m = static_cast<std::size_t>(j) * p + i;
      out.means[m] = kn * xs[i] * ys[j];
      out.d_derivs[m] = kn * xs_d[i] * ys[j];
      out.ns_derivs[m] = out.means[m] / s.n_s();
    }
  }
  finalize_signal(out, total_detected(s));
  return out;
}

// ---------------------------------------------------------------------------
// Bucket detection: every image-plane photon in a single mode.

inline ModeSignal bucket_signal(const SourceScene& s) {
  require_not_dark(s, "bucket_signal");
  ModeSignal out;
  out.n_s = s.n_s();
  const double nd = total_detected(s);
  out.means = {nd};
  out.d_derivs = {total_detected_d_deriv(s)};
  out.ns_derivs = {nd / s.n_s()};
  out.amp_d_derivs = {total_detected_d_deriv(s) / (2.0 * std::sqrt(nd))};
  finalize_signal(out, nd);
  return out;
}

inline ModeSignal make_signal(const SourceScene& s, const MeasurementBasis& basis) {
  return std::visit(
      [&](const auto& b) -> ModeSignal {
        using T = std::decay_t<decltype(b)>;
        if constexpr (std::is_same_v<T, HermiteGauss>) return hg_mode_signal(s, b);
        else if constexpr (std::is_same_v<T, DirectImagingGrid>) return di_mode_signal(s, b);
        else return bucket_signal(s);
      },
      basis);
}

/// Per-emitted-photon detection probabilities p_m = N_m / N_S.
inline std::vector<double> detection_probabilities(const ModeSignal& signal) {
  std::vector<double> p(signal.means.size());
  for (std::size_t m = 0; m < p.size(); ++m) p[m] = signal.means[m] / signal.n_s;
  return p;
}

}  // namespace cohsep
