// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>

#include "featuremark/theory.hpp"

namespace fm = featuremark;
namespace th = featuremark::theory;

TEST(Theory, PMinAtPublishedHyperparameters) {
  // Phi(2.2 + 0.1 * 0.142 / 0.029) - Phi(1.8 - 0.1 * 0.142 / 0.029), evaluated with mpmath.
  EXPECT_NEAR(th::p_min(0.1, 0.142, 0.029), 0.0914633102485012, 1e-12);
}

TEST(Theory, PMinMatchesWithinFormulaAtWorstCaseTarget) {
  const double target = 0.142 + 2 * 0.029;
  EXPECT_NEAR(th::p_min(0.1, 0.142, 0.029), th::p_within(target, 0.1, 0.142, 0.029), 1e-15);
}

TEST(Theory, VanishingTolerance) {
  EXPECT_LT(th::p_min(1e-8, 0.142, 0.029), 1e-6);
}

TEST(Theory, SuccessProbabilityBounds) {
  const double p = th::p_min(0.1, 0.142, 0.029);
  EXPECT_NEAR(th::success_probability(20, p), 0.8532, 0.005);
  EXPECT_NEAR(th::success_probability(10, p), 0.61, 0.02);
  EXPECT_GE(th::success_probability(50, p), 0.99);
  EXPECT_DOUBLE_EQ(th::success_probability(1, p), p);
  EXPECT_EQ(th::success_probability(5, 0.0), 0.0);
  EXPECT_EQ(th::success_probability(5, 1.0), 1.0);
  EXPECT_THROW(th::success_probability(0, p), fm::Error);
}

TEST(Theory, RequiredCandidatesInvertsSuccess) {
  const double p = th::p_min(0.1, 0.142, 0.029);
  const auto n = th::required_candidates(0.85, p);
  EXPECT_GE(th::success_probability(n, p), 0.85);
  EXPECT_LT(th::success_probability(n - 1, p), 0.85);
  EXPECT_EQ(n, 20u);
  EXPECT_EQ(th::required_candidates(0.5, 1.0), 1u);
  try {
    th::required_candidates(0.5, 0.0);
    FAIL();
  } catch (const fm::Error& e) {
    EXPECT_EQ(e.code(), fm::Errc::target_unreachable);
  }
}

TEST(Theory, MonteCarloAgreesWithClosedForm) {
  const th::BoundInputs in;
  const double target = in.mu + 2 * in.sigma;
  const auto mc = th::monte_carlo_p_within(target, in, 100000, 17);
  const double closed = th::p_min(in.eps_tol, in.mu, in.sigma);
  EXPECT_LT(std::abs(mc.rate - closed), 3 * mc.standard_error);
  EXPECT_EQ(mc.trials, 100000u);
}

TEST(Theory, BoundTable) {
  const auto rows = th::bound_table({});
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(rows[2].n, 20u);
  EXPECT_NEAR(rows[2].success, 0.853, 0.0005);
  for (std::size_t i = 1; i < rows.size(); ++i) EXPECT_GT(rows[i].success, rows[i - 1].success);
}

TEST(Theory, InputValidation) {
  EXPECT_THROW(th::p_min(0.0, 0.142, 0.029), fm::Error);
  EXPECT_THROW(th::p_min(0.1, 0.142, 0.0), fm::Error);
}
