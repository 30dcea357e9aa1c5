#pragma once

// Scene parametrization and the scalar optics every other module consumes:
// the Gaussian soft-aperture PSF, the interference parameter chi, the image
// overlap delta, and the total detected photon number with its variance.

#include <cmath>
#include <string>
#include <vector>

#include "cohsep/numeric.hpp"
#include "cohsep/statistics.hpp"

namespace cohsep {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// Exact zero for trigonometric values that are zero up to rounding of the
/// argument (cos(pi/2), sin(pi), ...). Keeps the phi in {0, pi} and
/// phi = pi/2 special cases exact.
inline double snap_trig(double v) { return std::abs(v) < 1e-15 ? 0.0 : v; }

/// Two mutually coherent point sources imaged through a Gaussian soft
/// aperture. Lengths are kept as (d, sigma); everything downstream works with
/// the dimensionless x = d / sigma. Angles are radians, phi wrapped to [0, 2 pi).
class SourceScene {
 public:
  static SourceScene make(double d, double sigma, double theta, double phi, double kappa,
                          double n_s) {
    if (!(sigma > 0.0)) throw domain_error("scene: sigma must be positive");
    if (!(d >= 0.0) || !std::isfinite(d)) throw domain_error("scene: d must be finite and >= 0");
    if (!(theta >= 0.0 && theta <= numeric::pi / 4 + 1e-15))
      throw domain_error("scene: theta must lie in [0, pi/4]");
    if (!std::isfinite(phi)) throw domain_error("scene: phi must be finite");
    if (!(kappa > 0.0 && kappa <= 1.0)) throw domain_error("scene: kappa must lie in (0, 1]");
    if (!(n_s > 0.0) || !std::isfinite(n_s)) throw domain_error("scene: n_s must be positive");
    double wrapped = std::fmod(phi, 2.0 * numeric::pi);
    if (wrapped < 0.0) wrapped += 2.0 * numeric::pi;
    if (wrapped >= 2.0 * numeric::pi) wrapped = 0.0;
    return SourceScene(d, sigma, std::min(theta, numeric::pi / 4), wrapped, kappa, n_s);
  }

  double d() const { return d_; }
  double sigma() const { return sigma_; }
  double theta() const { return theta_; }
  double phi() const { return phi_; }
  double kappa() const { return kappa_; }
  double n_s() const { return n_s_; }

  /// Separation in PSF widths.
  double x() const { return d_ / sigma_; }

  double cos_phi() const { return snap_trig(std::cos(phi_)); }
  double sin_phi() const { return snap_trig(std::sin(phi_)); }

  /// True when the image field is real up to a global phase, i.e. the
  /// in-phase / anti-phase / single-source cases.
  bool real_field() const { return theta_ == 0.0 || sin_phi() == 0.0; }

  SourceScene with_d(double d) const { return make(d, sigma_, theta_, phi_, kappa_, n_s_); }
  SourceScene with_theta(double t) const { return make(d_, sigma_, t, phi_, kappa_, n_s_); }
  SourceScene with_phi(double p) const { return make(d_, sigma_, theta_, p, kappa_, n_s_); }
  SourceScene with_kappa(double k) const { return make(d_, sigma_, theta_, phi_, k, n_s_); }
  SourceScene with_n_s(double n) const { return make(d_, sigma_, theta_, phi_, kappa_, n); }

  Vec2 r1() const { return {-0.5 * d_, 0.0}; }  // carries cos(theta)
  Vec2 r2() const { return {0.5 * d_, 0.0}; }   // carries e^{i phi} sin(theta)

 private:
  SourceScene(double d, double sigma, double theta, double phi, double kappa, double n_s)
      : d_(d), sigma_(sigma), theta_(theta), phi_(phi), kappa_(kappa), n_s_(n_s) {}

  double d_, sigma_, theta_, phi_, kappa_, n_s_;
};

/// u0(r) = sqrt(1 / 2 pi sigma^2) exp(-|r|^2 / 4 sigma^2), unit L2 norm.
inline double psf_amplitude(Vec2 r, double sigma) {
  if (!(sigma > 0.0)) throw domain_error("psf_amplitude: sigma must be positive");
  return std::sqrt(1.0 / (2.0 * numeric::pi * sigma * sigma)) *
         std::exp(-(r.x * r.x + r.y * r.y) / (4.0 * sigma * sigma));
}

/// One-dimensional factor of the PSF: u0(x, y) = psf_1d(x) psf_1d(y).
inline double psf_1d(double x, double sigma) {
  return std::pow(2.0 * numeric::pi * sigma * sigma, -0.25) * std::exp(-x * x / (4.0 * sigma * sigma));
}

inline double compute_chi(double theta, double phi) {
  return std::sin(2.0 * theta) * snap_trig(std::cos(phi));
}

inline double compute_delta(double d, double sigma) {
  if (!(sigma > 0.0)) throw domain_error("compute_delta: sigma must be positive");
  if (!(d >= 0.0)) throw domain_error("compute_delta: d must be >= 0");
  return std::exp(-d * d / (8.0 * sigma * sigma));
}

/// d(delta)/dd.
inline double delta_d_deriv(double d, double sigma) {
  return -d / (4.0 * sigma * sigma) * compute_delta(d, sigma);
}

/// 1 + chi delta without cancellation near the dark point chi -> -1, d -> 0.
inline double one_plus_chi_delta(double chi, double d, double sigma) {
  return (1.0 + chi) + chi * std::expm1(-d * d / (8.0 * sigma * sigma));
}

struct InterferenceParams {
  double chi = 0.0;
  double delta = 1.0;
};

inline InterferenceParams interference(const SourceScene& s) {
  return {compute_chi(s.theta(), s.phi()), compute_delta(s.d(), s.sigma())};
}

inline double scene_chi(const SourceScene& s) { return compute_chi(s.theta(), s.phi()); }

inline bool is_dark_point(const SourceScene& s) {
  return s.d() == 0.0 && one_plus_chi_delta(scene_chi(s), 0.0, s.sigma()) <= 0.0;
}

inline void require_not_dark(const SourceScene& s, const char* what) {
  if (is_dark_point(s))
    throw domain_error(std::string(what) +
                       ": chi = -1 at d = 0 gives N_D = 0 (perfect destructive interference)");
}

/// N_D = kappa N_S (1 + chi delta); the same for every basis that captures the
/// whole image field.
inline double total_detected(const SourceScene& s) {
  return s.kappa() * s.n_s() * one_plus_chi_delta(scene_chi(s), s.d(), s.sigma());
}

inline double total_detected_d_deriv(const SourceScene& s) {
  return s.kappa() * s.n_s() * scene_chi(s) * delta_d_deriv(s.d(), s.sigma());
}

inline double total_detected_ns_deriv(const SourceScene& s) {
  return s.kappa() * one_plus_chi_delta(scene_chi(s), s.d(), s.sigma());
}

struct DetectedVariance {
  double value = 0.0;
  /// 1 + h N_D < 0: more photons detected on average than a sub-Poissonian
  /// source can deliver (kappa (1 + chi delta) > 1 with Fock light).
  bool non_physical = false;
};

/// Delta N_D^2 = N_D (1 + h N_D).
inline DetectedVariance detected_variance(const SourceScene& s, const SourceStatistics& stats) {
  const double h = h_param(stats, s.n_s());
  const double nd = total_detected(s);
  const double factor = 1.0 + h * nd;
  return {nd * factor, factor < -1e-12};
}

}  // namespace cohsep
