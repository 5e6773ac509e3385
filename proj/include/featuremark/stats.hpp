// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "featuremark/errors.hpp"

namespace featuremark::stats {

/// Standard normal CDF through the C library's erfc, which is accurate to a
/// few ulp over the whole real line (well past 1e-12 absolute).
inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

inline double normal_quantile(double p) {
  return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

inline double mean(std::span<const double> xs) {
  require(!xs.empty(), Errc::invalid_argument, "mean of empty sample");
  return std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
}

/// Sample standard deviation (n - 1 denominator).
inline double stddev(std::span<const double> xs) {
  require(xs.size() >= 2, Errc::invalid_argument, "stddev needs two samples");
  const double m = mean(xs);
  double ss = 0.0;
  for (double x : xs) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(xs.size() - 1));
}

/// Pearson correlation; NaN when either side has zero variance.
inline double pearson(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size() && x.size() >= 2, Errc::invalid_argument,
          "pearson needs two equal-length samples");
  const double mx = mean(x), my = mean(y);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

/// P(T > t) for Student's t with `df` degrees of freedom.
inline double student_t_upper(double t, double df) {
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const boost::math::students_t_distribution<double> dist(df);
  return boost::math::cdf(boost::math::complement(dist, t));
}

/// Critical value t such that P(T > t) = alpha.
inline double student_t_critical(double alpha, double df) {
  const boost::math::students_t_distribution<double> dist(df);
  return boost::math::quantile(boost::math::complement(dist, alpha));
}

/// Kolmogorov-Smirnov distance between the sample and Uniform(0, 1).
inline double ks_uniform(std::vector<double> xs) {
  require(!xs.empty(), Errc::invalid_argument, "KS of empty sample");
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double x = std::clamp(xs[i], 0.0, 1.0);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - x, x - static_cast<double>(i) / n});
  }
  return d;
}

struct ShapiroWilk {
  double w;
  double p_value;
};

/*!
 * Shapiro-Wilk normality test with Royston's (1992, 1995) approximations for
 * the coefficients and the null distribution of W; valid for 4 <= n <= 5000.
 */
inline ShapiroWilk shapiro_wilk(std::vector<double> xs) {
  const std::size_t n = xs.size();
  require(n >= 4 && n <= 5000, Errc::invalid_argument, "Shapiro-Wilk needs 4..5000 samples");
  std::sort(xs.begin(), xs.end());
  const double nd = static_cast<double>(n);

  std::vector<double> m(n);
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = normal_quantile((static_cast<double>(i) + 1.0 - 0.375) / (nd + 0.25));
  }
  double mm = 0.0;
  for (double v : m) mm += v * v;

  const double u = 1.0 / std::sqrt(nd);
  auto poly = [u](std::initializer_list<double> c) {
    double acc = 0.0;
    for (double k : c) acc = acc * u + k;
    return acc;
  };
  std::vector<double> a(n);
  const double an = poly({-2.706056, 4.434685, -2.071190, -0.147981, 0.221157, 0.0}) +
                    m[n - 1] / std::sqrt(mm);
  double phi;
  if (n > 5) {
    const double an1 = poly({-3.582633, 5.682633, -1.752461, -0.293762, 0.042981, 0.0}) +
                       m[n - 2] / std::sqrt(mm);
    phi = (mm - 2.0 * m[n - 1] * m[n - 1] - 2.0 * m[n - 2] * m[n - 2]) /
          (1.0 - 2.0 * an * an - 2.0 * an1 * an1);
    a[n - 2] = an1;
    a[1] = -an1;
    for (std::size_t i = 2; i + 2 < n; ++i) a[i] = m[i] / std::sqrt(phi);
  } else {
    phi = (mm - 2.0 * m[n - 1] * m[n - 1]) / (1.0 - 2.0 * an * an);
    for (std::size_t i = 1; i + 1 < n; ++i) a[i] = m[i] / std::sqrt(phi);
  }
  a[n - 1] = an;
  a[0] = -an;

  const double xbar = std::accumulate(xs.begin(), xs.end(), 0.0) / nd;
  double num = 0.0, ss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += a[i] * xs[i];
    ss += (xs[i] - xbar) * (xs[i] - xbar);
  }
  require(ss > 0.0, Errc::invalid_argument, "Shapiro-Wilk of a constant sample");
  const double w = std::min(1.0, num * num / ss);

  double z;
  if (n >= 12) {
    const double ln = std::log(nd);
    const double mu = ((0.0038915 * ln - 0.083751) * ln - 0.31082) * ln - 1.5861;
    const double sigma = std::exp((0.0030302 * ln - 0.082676) * ln - 0.4803);
    z = (std::log1p(-w) - mu) / sigma;
  } else {
    const double gamma = 0.459 * nd - 2.273;
    const double mu = ((-0.0006714 * nd + 0.025054) * nd - 0.39978) * nd + 0.5440;
    const double sigma = std::exp(((-0.0020322 * nd + 0.062767) * nd - 0.77857) * nd + 1.3822);
    z = (-std::log(gamma - std::log1p(-w)) - mu) / sigma;
  }
  return {w, 1.0 - normal_cdf(z)};
}

}  // namespace featuremark::stats
