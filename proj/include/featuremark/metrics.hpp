// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <span>
#include <vector>

#include "featuremark/errors.hpp"

namespace featuremark {

/// Positive class is "watermarked"; a text is flagged when score >= threshold.
struct RocPoint {
  double threshold;
  double fpr;
  double tpr;
};

/// One point per distinct score, from the strictest threshold (+inf, nothing
/// flagged) down to the loosest. fpr and tpr are non-decreasing.
inline std::vector<RocPoint> roc_curve(std::span<const double> positives,
                                       std::span<const double> negatives) {
  require(!positives.empty() && !negatives.empty(), Errc::invalid_argument,
          "ROC needs both classes");
  std::vector<double> pos(positives.begin(), positives.end());
  std::vector<double> neg(negatives.begin(), negatives.end());
  std::sort(pos.begin(), pos.end(), std::greater<>());
  std::sort(neg.begin(), neg.end(), std::greater<>());
  std::vector<double> thresholds(pos);
  thresholds.insert(thresholds.end(), neg.begin(), neg.end());
  std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()), thresholds.end());

  const double np = static_cast<double>(pos.size());
  const double nn = static_cast<double>(neg.size());
  std::vector<RocPoint> roc;
  roc.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
  std::size_t ip = 0, in = 0;
  for (double t : thresholds) {
    while (ip < pos.size() && pos[ip] >= t) ++ip;
    while (in < neg.size() && neg[in] >= t) ++in;
    roc.push_back({t, static_cast<double>(in) / nn, static_cast<double>(ip) / np});
  }
  return roc;
}

/// Area under the ROC curve as the Mann-Whitney probability
/// P(pos > neg) + P(pos == neg) / 2.
inline double auc(std::span<const double> positives, std::span<const double> negatives) {
  require(!positives.empty() && !negatives.empty(), Errc::invalid_argument,
          "AUC needs both classes");
  std::vector<double> neg(negatives.begin(), negatives.end());
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (double p : positives) {
    const auto lo = std::lower_bound(neg.begin(), neg.end(), p);
    const auto hi = std::upper_bound(lo, neg.end(), p);
    wins += static_cast<double>(lo - neg.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  return wins / (static_cast<double>(positives.size()) * static_cast<double>(negatives.size()));
}

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  double accuracy() const {
    return static_cast<double>(tp + tn) / static_cast<double>(tp + fp + tn + fn);
  }
  double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / (tp + fp); }
  double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / (tp + fn); }
  double fpr() const { return fp + tn == 0 ? 0.0 : static_cast<double>(fp) / (fp + tn); }
  double f1() const {
    const double p = precision(), r = recall();
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
};

inline Confusion confusion_at(std::span<const double> positives, std::span<const double> negatives,
                              double threshold) {
  Confusion c;
  for (double s : positives) (s >= threshold ? c.tp : c.fn)++;
  for (double s : negatives) (s >= threshold ? c.fp : c.tn)++;
  return c;
}

struct OperatingPoint {
  double threshold;
  Confusion confusion;
};

/// Loosest threshold whose false-positive rate does not exceed `max_fpr`.
inline OperatingPoint operating_point(std::span<const double> positives,
                                      std::span<const double> negatives, double max_fpr = 0.01) {
  const auto roc = roc_curve(positives, negatives);
  double threshold = roc.front().threshold;
  for (const RocPoint& p : roc) {
    if (p.fpr <= max_fpr) threshold = p.threshold;
  }
  return {threshold, confusion_at(positives, negatives, threshold)};
}

inline void write_roc_csv(const std::filesystem::path& path, std::span<const RocPoint> roc) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open " + path.string() + " for writing");
  out.precision(17);
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : roc) out << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
}

}  // namespace featuremark
