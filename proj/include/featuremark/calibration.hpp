// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "featuremark/errors.hpp"
#include "featuremark/features.hpp"
#include "featuremark/stats.hpp"
#include "featuremark/text_units.hpp"

namespace featuremark {

inline constexpr int kCalibrationFormatVersion = 1;
inline constexpr int kMinCalibrationFormatVersion = 1;
inline constexpr std::size_t kMinCalibrationUnits = 100;
inline constexpr double kDefaultDfThreshold = 0.5;

/// Empirical distribution of the statistic on natural text, bound to one
/// extractor and one background mask.
struct CalibrationModel {
  int format_version = kCalibrationFormatVersion;
  std::string extractor_id;
  std::vector<double> sorted_samples;
  double mu = 0.0;
  double sigma = 0.0;
  BackgroundMask mask;
  std::string created_at;

  /// Rank transform |{samples <= s}| / (n + 1), clamped half a step inside
  /// both ends so the result never touches 0 or 1.
  double normalize(double s) const {
    const double n1 = static_cast<double>(sorted_samples.size()) + 1.0;
    const auto rank = std::upper_bound(sorted_samples.begin(), sorted_samples.end(), s) -
                      sorted_samples.begin();
    const double lo = 0.5 / n1;
    return std::clamp(static_cast<double>(rank) / n1, lo, 1.0 - lo);
  }

  /// Throws CalibrationMismatch unless `extractor` is the one this model was fit with.
  void bind(const FeatureExtractor& extractor) const {
    if (extractor.id() != extractor_id) {
      throw Error(Errc::calibration_mismatch,
                  "calibration was fit with '" + extractor_id + "' but extractor is '" +
                      extractor.id() + "'");
    }
    require(extractor.dim() == mask.dim(), Errc::calibration_mismatch,
            "calibration mask dim differs from extractor dim");
  }

  friend bool operator==(const CalibrationModel&, const CalibrationModel&) = default;
};

inline double normalize(double s, const CalibrationModel& model) { return model.normalize(s); }

namespace detail {

inline std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace detail

struct FitOptions {
  /// Features active in more than this fraction of units are masked. 1.0
  /// disables masking.
  double df_threshold = kDefaultDfThreshold;
  /// Fixed timestamp for reproducible artifacts; empty means now.
  std::string created_at;
};

/// Fits the background mask, then the empirical distribution of the masked
/// statistic. Units on which the statistic is undefined under the mask are
/// left out of the sample.
inline CalibrationModel fit(std::span<const Unit> corpus_units, const FeatureExtractor& extractor,
                            FitOptions options = {}) {
  require(options.df_threshold > 0.0 && options.df_threshold <= 1.0, Errc::invalid_argument,
          "df_threshold must lie in (0, 1]");
  if (corpus_units.size() < kMinCalibrationUnits) {
    throw Error(Errc::too_few_units, "calibration needs at least " +
                                         std::to_string(kMinCalibrationUnits) + " units");
  }

  std::vector<ActivationMatrix> acts;
  acts.reserve(corpus_units.size());
  std::vector<std::uint32_t> doc_freq(extractor.dim(), 0);
  std::vector<FeatureIndex> seen;
  for (const Unit& u : corpus_units) {
    acts.push_back(extractor.extract(u.text));
    seen.clear();
    for (const SparseRow& row : acts.back().rows) {
      seen.insert(seen.end(), row.indices.begin(), row.indices.end());
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    for (FeatureIndex i : seen) ++doc_freq[i];
  }

  std::vector<FeatureIndex> excluded;
  const double units = static_cast<double>(corpus_units.size());
  for (FeatureIndex i = 0; i < doc_freq.size(); ++i) {
    if (static_cast<double>(doc_freq[i]) / units > options.df_threshold) excluded.push_back(i);
  }
  CalibrationModel model;
  model.extractor_id = extractor.id();
  model.mask = BackgroundMask(extractor.dim(), std::move(excluded));
  model.created_at = options.created_at.empty() ? detail::utc_timestamp() : options.created_at;

  model.sorted_samples.reserve(acts.size());
  for (const ActivationMatrix& a : acts) {
    try {
      model.sorted_samples.push_back(compute_fcs(a, model.mask));
    } catch (const Error& e) {
      if (e.code() != Errc::all_masked && e.code() != Errc::zero_mass) throw;
    }
  }
  if (model.sorted_samples.size() < kMinCalibrationUnits) {
    throw Error(Errc::too_few_units, "too few calibration units are scoreable under the mask");
  }
  std::sort(model.sorted_samples.begin(), model.sorted_samples.end());
  model.mu = stats::mean(model.sorted_samples);
  model.sigma = stats::stddev(model.sorted_samples);
  if (model.sorted_samples.front() == model.sorted_samples.back() || !(model.sigma > 0.0)) {
    throw Error(Errc::degenerate_distribution, "calibration statistic has zero variance");
  }
  return model;
}

inline nlohmann::json to_json(const CalibrationModel& model) {
  return {
      {"format_version", model.format_version},
      {"extractor_id", model.extractor_id},
      {"sorted_samples", model.sorted_samples},
      {"mu", model.mu},
      {"sigma", model.sigma},
      {"mask", {{"dim", model.mask.dim()}, {"excluded", model.mask.excluded()}}},
      {"created_at", model.created_at},
  };
}

/// Parses and validates a model. `reader_version` is the newest format the
/// caller understands.
inline CalibrationModel calibration_from_json(const nlohmann::json& j,
                                              int reader_version = kCalibrationFormatVersion) {
  CalibrationModel m;
  try {
    m.format_version = j.at("format_version").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_model, std::string("calibration: ") + e.what());
  }
  if (m.format_version < kMinCalibrationFormatVersion || m.format_version > reader_version) {
    throw Error(Errc::version_mismatch, "calibration format_version " +
                                           std::to_string(m.format_version) + " not readable by v" +
                                           std::to_string(reader_version));
  }
  try {
    m.extractor_id = j.at("extractor_id").get<std::string>();
    m.sorted_samples = j.at("sorted_samples").get<std::vector<double>>();
    m.mu = j.at("mu").get<double>();
    m.sigma = j.at("sigma").get<double>();
    m.mask = BackgroundMask(j.at("mask").at("dim").get<std::uint32_t>(),
                            j.at("mask").at("excluded").get<std::vector<FeatureIndex>>());
    m.created_at = j.at("created_at").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::corrupt_model, std::string("calibration: ") + e.what());
  } catch (const Error& e) {
    throw Error(Errc::corrupt_model, std::string("calibration: ") + e.what());
  }
  if (m.sorted_samples.empty() || !std::is_sorted(m.sorted_samples.begin(), m.sorted_samples.end())) {
    throw Error(Errc::corrupt_model, "calibration samples are empty or not sorted");
  }
  const bool finite = std::all_of(m.sorted_samples.begin(), m.sorted_samples.end(),
                                  [](double x) { return std::isfinite(x); });
  if (!finite || !std::isfinite(m.mu) || !(m.sigma > 0.0) || !std::isfinite(m.sigma)) {
    throw Error(Errc::corrupt_model, "calibration contains non-finite or degenerate moments");
  }
  return m;
}

inline void save(const CalibrationModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::io_error, "cannot open " + path.string() + " for writing");
  // Round-trip exact doubles: nlohmann emits shortest representation.
  out << to_json(model).dump(2) << '\n';
  if (!out) throw Error(Errc::io_error, "write failed for " + path.string());
}

inline CalibrationModel load_calibration(const std::filesystem::path& path,
                                         int reader_version = kCalibrationFormatVersion) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::io_error, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::corrupt_model, std::string("calibration parse error: ") + e.what());
  }
  return calibration_from_json(j, reader_version);
}

/// Extractor, calibration and segmentation that together define z(u).
struct Pipeline {
  const FeatureExtractor& extractor;
  const CalibrationModel& model;
  DomainKind kind = DomainKind::natural_language;

  Pipeline(const FeatureExtractor& e, const CalibrationModel& m,
           DomainKind k = DomainKind::natural_language)
      : extractor(e), model(m), kind(k) {
    model.bind(extractor);
  }

  double raw(std::string_view unit_text) const {
    return statistic(unit_text, extractor, model.mask);
  }
  double z(std::string_view unit_text) const { return model.normalize(raw(unit_text)); }
};

}  // namespace featuremark
