// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featuremark/calibration.hpp"
#include "featuremark/errors.hpp"
#include "featuremark/keying.hpp"
#include "featuremark/stats.hpp"
#include "featuremark/text_units.hpp"

namespace featuremark {

struct AlignmentThresholds {
  double r_min = 0.95;
  double r_max = 1.05;
  double o_min = 0.95;

  void validate() const {
    require(r_min > 0.0 && r_min < 1.0 && r_max > 1.0, Errc::invalid_argument,
            "alignment ratio bounds must satisfy 0 < r_min < 1 < r_max");
    require(o_min > 0.0 && o_min <= 1.0, Errc::invalid_argument, "o_min must lie in (0, 1]");
  }
};

/// Range filter then overlap filter: the observed range must match the
/// target range within (r_min, r_max), and at least an o_min share of the
/// targets must fall inside the observed range.
inline bool check_alignment(std::span<const double> targets, std::span<const double> z,
                            const AlignmentThresholds& th = {}) {
  if (targets.size() != z.size()) {
    throw Error(Errc::length_mismatch, "targets and observations differ in length");
  }
  require(targets.size() >= 2, Errc::invalid_argument, "alignment needs at least two units");
  const auto [t_lo, t_hi] = std::minmax_element(targets.begin(), targets.end());
  const auto [z_lo, z_hi] = std::minmax_element(z.begin(), z.end());
  if (*t_hi == *t_lo) throw Error(Errc::degenerate_targets, "targets have zero range");
  const double ratio = (*z_hi - *z_lo) / (*t_hi - *t_lo);
  if (!(th.r_min < ratio && ratio < th.r_max)) return false;
  const auto inside = std::count_if(targets.begin(), targets.end(),
                                    [&](double t) { return t >= *z_lo && t <= *z_hi; });
  return static_cast<double>(inside) / static_cast<double>(targets.size()) >= th.o_min;
}

enum class Correction { none, bonferroni };

enum class KeyStatus { accepted, not_significant, alignment_rejected };

/// t reported for an exact match, where the correlation test is undefined.
inline constexpr double kExactMatchT = 1e9;
inline constexpr double kExactMatchTolerance = 1e-9;

struct KeyScore {
  WatermarkKey key;
  bool alignment_passed = false;
  KeyStatus status = KeyStatus::alignment_rejected;
  /// Present whenever the correlation is defined, even if alignment failed.
  std::optional<double> t;
  std::optional<double> p;
};

/*!
 * Correlation t-test of observations against the key's targets.
 *
 * r is Pearson's correlation, t = r sqrt((M - 2) / (1 - r^2)), and p is the
 * one-sided upper tail of Student's t with M - 2 degrees of freedom. The key
 * is accepted iff alignment passes, t exceeds the alpha critical value, and
 * p < alpha.
 */
inline KeyScore score_targets(std::span<const double> z, std::span<const double> targets,
                              const WatermarkKey& key, const AlignmentThresholds& th,
                              double alpha) {
  require(z.size() >= 3, Errc::too_few_units, "scoring needs at least 3 units");
  require(alpha > 0.0 && alpha < 1.0, Errc::invalid_argument, "alpha must lie in (0, 1)");
  KeyScore s;
  s.key = key;
  s.alignment_passed = check_alignment(targets, z, th);

  double max_gap = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) max_gap = std::max(max_gap, std::abs(z[i] - targets[i]));
  const double df = static_cast<double>(z.size()) - 2.0;
  if (max_gap < kExactMatchTolerance) {
    s.t = kExactMatchT;
    s.p = 0.0;
  } else {
    const double r = stats::pearson(z, targets);
    if (std::isnan(r)) {
      s.status = KeyStatus::alignment_rejected;
      return s;
    }
    s.t = r >= 1.0 ? kExactMatchT : r * std::sqrt(df / (1.0 - r * r));
    s.p = stats::student_t_upper(*s.t, df);
  }
  if (!s.alignment_passed) {
    s.status = KeyStatus::alignment_rejected;
  } else if (*s.t > stats::student_t_critical(alpha, df) && *s.p < alpha) {
    s.status = KeyStatus::accepted;
  } else {
    s.status = KeyStatus::not_significant;
  }
  return s;
}

inline KeyScore score_key(std::span<const double> z, const WatermarkKey& key,
                          const AlignmentThresholds& th = {}, double alpha = 0.01) {
  const auto targets = targets_from_key(key, z.size());
  return score_targets(z, targets, key, th, alpha);
}

struct DetectOptions {
  AlignmentThresholds thresholds;
  double alpha = 0.01;
  Correction correction = Correction::none;
};

struct DetectionReport {
  std::vector<double> z;
  std::vector<KeyScore> per_key;
  /// Empty means REJECT.
  std::optional<Message> decision;
  /// Index into per_key of the decided key.
  std::optional<std::size_t> decided_index;
  double alpha = 0.01;
  /// Per-key level after multiplicity correction.
  double effective_alpha = 0.01;

  bool rejected() const { return !decision.has_value(); }

  /// Scalar for threshold sweeps: aligned keys outrank every unaligned key,
  /// then higher t wins. Encoded as tier * 1e4 + clamp(t, -1e3, 1e3).
  double ranking_score() const {
    bool any_aligned = false;
    double best = -1e3;
    for (const KeyScore& k : per_key) {
      if (!k.t) continue;
      const double t = std::clamp(*k.t, -1e3, 1e3);
      if (k.alignment_passed && !any_aligned) {
        any_aligned = true;
        best = t;
      } else if (k.alignment_passed == any_aligned) {
        best = std::max(best, t);
      }
    }
    return (any_aligned ? 1e4 : 0.0) + best;
  }
};

/// Scores every key against precomputed observations.
inline DetectionReport detect_normalized(std::vector<double> z, std::span<const WatermarkKey> keys,
                                         const DetectOptions& options = {}) {
  require(!keys.empty(), Errc::invalid_argument, "no keys to test");
  if (z.size() < 3) throw Error(Errc::too_few_units, "detection needs at least 3 units");
  options.thresholds.validate();
  DetectionReport report;
  report.alpha = options.alpha;
  report.effective_alpha = options.correction == Correction::bonferroni
                               ? options.alpha / static_cast<double>(keys.size())
                               : options.alpha;
  report.per_key.reserve(keys.size());
  for (const WatermarkKey& key : keys) {
    report.per_key.push_back(score_key(z, key, options.thresholds, report.effective_alpha));
  }
  for (std::size_t i = 0; i < report.per_key.size(); ++i) {
    const KeyScore& s = report.per_key[i];
    if (s.status != KeyStatus::accepted) continue;
    if (!report.decided_index) {
      report.decided_index = i;
      continue;
    }
    const KeyScore& best = report.per_key[*report.decided_index];
    if (*s.t > *best.t || (*s.t == *best.t && s.key.message.value() < best.key.message.value())) {
      report.decided_index = i;
    }
  }
  if (report.decided_index) report.decision = report.per_key[*report.decided_index].key.message;
  report.z = std::move(z);
  return report;
}

/// Observed normalized statistics of every unit of `text`.
inline std::vector<double> observe(std::string_view text, const Pipeline& pipeline) {
  const auto units = segment_text(text, pipeline.kind, kPipelineSegmentation);
  std::vector<double> z;
  z.reserve(units.size());
  for (const Unit& u : units) z.push_back(pipeline.z(u.text));
  return z;
}

inline DetectionReport detect(std::string_view text, std::span<const WatermarkKey> keys,
                              const Pipeline& pipeline, const DetectOptions& options = {}) {
  auto z = observe(text, pipeline);
  if (z.size() < 3) throw Error(Errc::too_few_units, "detection needs at least 3 units");
  return detect_normalized(std::move(z), keys, options);
}

}  // namespace featuremark
