#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace cohsep {

/// Raised when an input lies outside the domain of an operation
/// (non-positive sigma, the chi = -1, d = 0 dark point, ...).
class domain_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Raised when an operation has no implementation for the requested case
/// (a DI closed form away from phi in {0, pi}, a sampler for CustomH, ...).
class unsupported_case : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Raised when a covariance or sensitivity matrix cannot be inverted.
class singular_matrix : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised when an adaptive quadrature fails to reach its tolerance.
class convergence_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace numeric {

inline constexpr double pi = std::numbers::pi;

/// Pairwise (cascade) summation in ascending index order. The result depends
/// only on the input sequence, never on how the caller produced it.
inline double pairwise_sum(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

/// Standard normal CDF with full relative accuracy in both tails.
inline double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / std::numbers::sqrt2);
}

/// P(a < Z < b) for a standard normal Z, computed on the tail that avoids
/// cancellation.
inline double normal_interval(double a, double b) {
  if (a >= 0.0) return 0.5 * (std::erfc(a / std::numbers::sqrt2) - std::erfc(b / std::numbers::sqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b / std::numbers::sqrt2) - std::erfc(-a / std::numbers::sqrt2));
  return 1.0 - normal_cdf(a) - (1.0 - normal_cdf(b));
}

inline double normal_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * pi);
}

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;  // |T(h) - T(h/2)| of the last refinement
  std::size_t intervals = 0;
};

/// Composite trapezoid on [a, b], halving the step until two successive
/// estimates agree to rel_tol (or abs_tol). Intended for smooth integrands
/// that decay to zero at both ends, where the rule converges geometrically.
inline QuadratureResult adaptive_trapezoid(const std::function<double(double)>& f, double a,
                                           double b, double rel_tol = 1e-13,
                                           double abs_tol = 1e-300,
                                           std::size_t initial_intervals = 256,
                                           std::size_t max_intervals = std::size_t{1} << 20) {
  std::size_t n = initial_intervals;
  double h = (b - a) / static_cast<double>(n);
  std::vector<double> samples(n + 1);
  for (std::size_t i = 0; i <= n; ++i) samples[i] = f(a + h * static_cast<double>(i));
  samples.front() *= 0.5;
  samples.back() *= 0.5;
  double sum = pairwise_sum(samples);
  double estimate = sum * h;

  while (n < max_intervals) {
    std::vector<double> mids(n);
    for (std::size_t i = 0; i < n; ++i) mids[i] = f(a + h * (static_cast<double>(i) + 0.5));
    sum += pairwise_sum(mids);
    n *= 2;
    h *= 0.5;
    const double refined = sum * h;
    const double err = std::abs(refined - estimate);
    estimate = refined;
    if (err <= rel_tol * std::abs(refined) || err <= abs_tol) return {refined, err, n};
  }
  throw convergence_error("adaptive_trapezoid: no convergence after " + std::to_string(n) +
                          " intervals on [" + std::to_string(a) + ", " + std::to_string(b) +
                          "], last estimate " + std::to_string(estimate));
}

/// splitmix64 finalizer; used to derive independent sub-seeds.
inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Sub-seed for stream `index` of a run seeded with `seed`.
inline constexpr std::uint64_t sub_seed(std::uint64_t seed, std::uint64_t index) {
  return splitmix64(seed + (index + 1) * 0x9E3779B97F4A7C15ULL);
}

inline bool relative_close(double a, double b, double rel, double abs_floor = 0.0) {
  return std::abs(a - b) <= rel * std::max(std::abs(a), std::abs(b)) + abs_floor;
}

}  // namespace numeric
}  // namespace cohsep
