#pragma once

// Photon-number statistics of the principal mode and exact samplers.
//
// Every measurable count statistic of two mutually coherent sources factorizes
// through the single principal mode: each emitted photon independently lands in
// measurement mode m with probability |A_m|^2, or is lost. A source model is
// therefore a distribution of the emitted photon number plus a multinomial
// split, and its second moments enter the bounds only through h = g2 - 1.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "cohsep/numeric.hpp"

namespace cohsep {

struct Fock {};      // photon number is the scene's n_s (must be integral)
struct Poisson {};
struct Thermal {};
struct CustomH {
  double h = 0.0;
};

using SourceStatistics = std::variant<Fock, Poisson, Thermal, CustomH>;

inline std::string statistics_name(const SourceStatistics& stats) {
  return std::visit(
      [](const auto& s) -> std::string {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Fock>) return "fock";
        else if constexpr (std::is_same_v<T, Poisson>) return "poisson";
        else if constexpr (std::is_same_v<T, Thermal>) return "thermal";
        else return "custom";
      },
      stats);
}

inline bool is_integral_count(double n) {
  return n >= 0.0 && std::floor(n) == n && n < 9.0e15;
}

/// Bunching parameter h = g2 - 1 = (var N_S - N_S) / N_S^2.
inline double h_param(const SourceStatistics& stats, double n_s) {
  if (!(n_s > 0.0)) throw domain_error("h_param: n_s must be positive");
  return std::visit(
      [n_s](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Fock>) {
          return -1.0 / n_s;
        } else if constexpr (std::is_same_v<T, Poisson>) {
          return 0.0;
        } else if constexpr (std::is_same_v<T, Thermal>) {
          return 1.0;
        } else {
          // var N_S >= 0 requires h >= -1/N_S
          if (s.h < -1.0 / n_s * (1.0 + 1e-12))
            throw domain_error("h_param: custom h = " + std::to_string(s.h) +
                               " is below -1/n_s = " + std::to_string(-1.0 / n_s));
          return s.h;
        }
      },
      stats);
}

using Rng = std::mt19937_64;

/// Emitted photon number for one repetition.
inline std::int64_t sample_emitted(const SourceStatistics& stats, double n_s, Rng& rng) {
  return std::visit(
      [&](const auto& s) -> std::int64_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Fock>) {
          if (!is_integral_count(n_s) || n_s < 1.0)
            throw domain_error("sample_emitted: Fock state needs an integer n_s >= 1, got " +
                               std::to_string(n_s));
          return static_cast<std::int64_t>(n_s);
        } else if constexpr (std::is_same_v<T, Poisson>) {
          return std::poisson_distribution<std::int64_t>(n_s)(rng);
        } else if constexpr (std::is_same_v<T, Thermal>) {
          // failures before first success, success probability 1/(1+n_s): mean n_s
          return std::geometric_distribution<std::int64_t>(1.0 / (1.0 + n_s))(rng);
        } else {
          throw unsupported_case("sample_emitted: h alone does not determine a distribution");
        }
      },
      stats);
}

/// Sum of the emitted photon numbers over `repetitions` independent
/// repetitions, drawn in one step from the exact distribution of the sum.
inline std::int64_t sample_emitted_total(const SourceStatistics& stats, double n_s,
                                         std::int64_t repetitions, Rng& rng) {
  if (repetitions < 1) throw domain_error("sample_emitted_total: repetitions must be >= 1");
  return std::visit(
      [&](const auto& s) -> std::int64_t {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Fock>) {
          return repetitions * sample_emitted(stats, n_s, rng);
        } else if constexpr (std::is_same_v<T, Poisson>) {
          return std::poisson_distribution<std::int64_t>(n_s * static_cast<double>(repetitions))(rng);
        } else if constexpr (std::is_same_v<T, Thermal>) {
          return std::negative_binomial_distribution<std::int64_t>(repetitions,
                                                                   1.0 / (1.0 + n_s))(rng);
        } else {
          throw unsupported_case("sample_emitted_total: h alone does not determine a distribution");
        }
      },
      stats);
}

inline void check_probabilities(std::span<const double> probabilities) {
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0)) throw domain_error("mode probabilities must be non-negative");
    total += p;
  }
  if (total > 1.0 + 1e-12)
    throw domain_error("mode probabilities sum to " + std::to_string(total) + " > 1");
}

/// Multinomial split of `n_emitted` photons over the modes; the residual
/// probability 1 - sum(p) is loss. Drawn by sequential conditional binomials
/// in ascending mode order.
inline std::vector<std::int64_t> sample_mode_counts(std::int64_t n_emitted,
                                                    std::span<const double> probabilities,
                                                    Rng& rng) {
  check_probabilities(probabilities);
  if (n_emitted < 0) throw domain_error("sample_mode_counts: negative photon number");
  std::vector<std::int64_t> counts(probabilities.size(), 0);
  std::int64_t remaining = n_emitted;
  double remaining_mass = 1.0;
  for (std::size_t m = 0; m < probabilities.size() && remaining > 0; ++m) {
    const double p = probabilities[m];
    if (p <= 0.0) continue;
    const double conditional = remaining_mass > 0.0 ? std::min(1.0, p / remaining_mass) : 1.0;
    const std::int64_t k =
        conditional >= 1.0 ? remaining
                           : std::binomial_distribution<std::int64_t>(remaining, conditional)(rng);
    counts[m] = k;
    remaining -= k;
    remaining_mass -= p;
  }
  return counts;
}

/// Independent per-mode Poisson counts with means p_m * n_s. Equal in
/// distribution to sample_emitted(Poisson) followed by sample_mode_counts.
inline std::vector<std::int64_t> sample_mode_counts_poisson(std::span<const double> probabilities,
                                                            double n_s, Rng& rng) {
  check_probabilities(probabilities);
  std::vector<std::int64_t> counts(probabilities.size(), 0);
  for (std::size_t m = 0; m < probabilities.size(); ++m) {
    const double mean = probabilities[m] * n_s;
    if (mean > 0.0) counts[m] = std::poisson_distribution<std::int64_t>(mean)(rng);
  }
  return counts;
}

}  // namespace cohsep
