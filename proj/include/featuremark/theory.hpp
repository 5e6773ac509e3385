// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "featuremark/errors.hpp"
#include "featuremark/random.hpp"
#include "featuremark/stats.hpp"

namespace featuremark::theory {

struct BoundInputs {
  /// Relative tolerance around the target.
  double eps_tol = 0.1;
  double mu = 0.142;
  double sigma = 0.029;

  void validate() const {
    require(eps_tol > 0.0 && eps_tol < 1.0, Errc::invalid_argument, "eps_tol must lie in (0, 1)");
    require(std::isfinite(mu), Errc::invalid_argument, "mu must be finite");
    require(sigma > 0.0 && std::isfinite(sigma), Errc::invalid_argument, "sigma must be positive");
  }
};

/// P(|S - target| <= eps_tol * target) for S ~ Normal(mu, sigma^2).
inline double p_within(double target, double eps_tol, double mu, double sigma) {
  const double hi = (target * (1.0 + eps_tol) - mu) / sigma;
  const double lo = (target * (1.0 - eps_tol) - mu) / sigma;
  return stats::normal_cdf(hi) - stats::normal_cdf(lo);
}

/// Single-candidate success probability at the worst-case target mu + 2 sigma:
/// Phi(2(1+k) + k mu/sigma) - Phi(2(1-k) - k mu/sigma).
inline double p_min(double eps_tol, double mu, double sigma) {
  BoundInputs{eps_tol, mu, sigma}.validate();
  const double ratio = mu / sigma;
  return stats::normal_cdf(2.0 * (1.0 + eps_tol) + eps_tol * ratio) -
         stats::normal_cdf(2.0 * (1.0 - eps_tol) - eps_tol * ratio);
}

/// Chance that at least one of `n` independent candidates succeeds.
inline double success_probability(std::uint64_t n, double p) {
  require(n >= 1, Errc::invalid_argument, "N must be at least 1");
  require(p >= 0.0 && p <= 1.0, Errc::invalid_argument, "p must lie in [0, 1]");
  return -std::expm1(static_cast<double>(n) * std::log1p(-p));
}

/// Smallest N with success_probability(N, p) >= target.
inline std::uint64_t required_candidates(double target, double p) {
  require(target > 0.0 && target < 1.0, Errc::invalid_argument, "target must lie in (0, 1)");
  require(p >= 0.0 && p <= 1.0, Errc::invalid_argument, "p must lie in [0, 1]");
  if (p == 0.0) throw Error(Errc::target_unreachable, "zero per-candidate success probability");
  if (p == 1.0) return 1;
  auto n = static_cast<std::uint64_t>(std::ceil(std::log1p(-target) / std::log1p(-p)));
  n = std::max<std::uint64_t>(n, 1);
  // Guard the ceil against rounding on either side.
  while (n > 1 && success_probability(n - 1, p) >= target) --n;
  while (success_probability(n, p) < target) ++n;
  return n;
}

struct MonteCarloEstimate {
  double rate;
  double standard_error;
  std::uint64_t trials;
};

/// Share of Normal(mu, sigma^2) draws within the relative tolerance of
/// `target`, with its binomial standard error. Normals come from Box-Muller
/// over a Philox stream.
inline MonteCarloEstimate monte_carlo_p_within(double target, const BoundInputs& in,
                                               std::uint64_t trials, std::uint64_t seed) {
  in.validate();
  require(trials >= 1, Errc::invalid_argument, "trials must be positive");
  CounterStream rng(seed);
  std::uint64_t hits = 0;
  for (std::uint64_t i = 0; i < trials; ++i) {
    const double u1 = to_unit_interval_open_low(rng());
    const double u2 = uniform01(rng);
    const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    const double s = in.mu + in.sigma * g;
    if (std::abs(s - target) <= in.eps_tol * target) ++hits;
  }
  const double rate = static_cast<double>(hits) / static_cast<double>(trials);
  return {rate, std::sqrt(rate * (1.0 - rate) / static_cast<double>(trials)), trials};
}

struct BoundRow {
  std::uint64_t n;
  double success;
};

inline std::vector<BoundRow> bound_table(const BoundInputs& in,
                                         const std::vector<std::uint64_t>& ns = {5, 10, 20, 50}) {
  const double p = p_min(in.eps_tol, in.mu, in.sigma);
  std::vector<BoundRow> rows;
  for (auto n : ns) rows.push_back({n, success_probability(n, p)});
  return rows;
}

}  // namespace featuremark::theory
