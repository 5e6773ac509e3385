// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "featuremark/errors.hpp"
#include "featuremark/hash.hpp"
#include "featuremark/text_units.hpp"
#include "featuremark/tokenize.hpp"

namespace featuremark {

using FeatureIndex = std::uint32_t;

/// Active features of one token: strictly increasing indices, positive values.
struct SparseRow {
  std::vector<FeatureIndex> indices;
  std::vector<double> values;

  double l1() const { return std::accumulate(values.begin(), values.end(), 0.0); }

  friend bool operator==(const SparseRow&, const SparseRow&) = default;
};

/// Per-token sparse activations of one unit.
struct ActivationMatrix {
  std::uint32_t dim = 0;
  std::vector<SparseRow> rows;

  std::size_t token_count() const { return rows.size(); }

  /// Throws Errc::protocol_error describing the first violated invariant.
  void validate() const {
    require(dim > 0, Errc::protocol_error, "activation dim must be positive");
    for (const SparseRow& row : rows) {
      require(row.indices.size() == row.values.size(), Errc::protocol_error,
              "row indices and values differ in length");
      for (std::size_t k = 0; k < row.indices.size(); ++k) {
        require(row.indices[k] < dim, Errc::protocol_error, "feature index out of range");
        require(k == 0 || row.indices[k - 1] < row.indices[k], Errc::protocol_error,
                "row indices must be strictly increasing");
        require(row.values[k] > 0.0 && std::isfinite(row.values[k]), Errc::protocol_error,
                "activation values must be positive and finite");
      }
    }
  }

  friend bool operator==(const ActivationMatrix&, const ActivationMatrix&) = default;
};

/// Features excluded from salience because they fire regardless of content.
class BackgroundMask {
 public:
  BackgroundMask() = default;

  BackgroundMask(std::uint32_t dim, std::vector<FeatureIndex> excluded)
      : dim_(dim), excluded_(std::move(excluded)) {
    require(dim_ > 0, Errc::invalid_argument, "mask dim must be positive");
    std::sort(excluded_.begin(), excluded_.end());
    excluded_.erase(std::unique(excluded_.begin(), excluded_.end()), excluded_.end());
    require(excluded_.empty() || excluded_.back() < dim_, Errc::invalid_argument,
            "masked feature out of range");
    require(excluded_.size() < dim_, Errc::invalid_argument, "mask must leave a feature unmasked");
  }

  static BackgroundMask none(std::uint32_t dim) { return BackgroundMask(dim, {}); }

  std::uint32_t dim() const { return dim_; }
  const std::vector<FeatureIndex>& excluded() const { return excluded_; }
  bool empty() const { return excluded_.empty(); }

  bool contains(FeatureIndex i) const {
    return std::binary_search(excluded_.begin(), excluded_.end(), i);
  }

  friend bool operator==(const BackgroundMask&, const BackgroundMask&) = default;

 private:
  std::uint32_t dim_ = 0;
  std::vector<FeatureIndex> excluded_;
};

/// Deterministic text -> activations map. Implementations that cannot serve
/// concurrent calls report it through `concurrent()`.
class FeatureExtractor {
 public:
  virtual ~FeatureExtractor() = default;
  virtual std::string id() const = 0;
  virtual std::uint32_t dim() const = 0;
  virtual ActivationMatrix extract(std::string_view unit_text) const = 0;
  virtual bool concurrent() const { return true; }
};

struct BuiltinExtractorConfig {
  std::uint32_t dim = 1024;
  std::uint32_t active_per_token = 8;
  std::uint32_t context_window = 1;
  /// Low indices reserved for surface-form features.
  std::uint32_t surface_band = 4;
};

/*!
 * Model-free stand-in for a sparse autoencoder.
 *
 * Every token carries exactly `active_per_token` features drawn from three
 * families, all computed from bytes alone:
 *
 *  - one surface feature in [0, surface_band), indexed by a hash of the token
 *    and valued in [0.9, 1.0]. These fire in nearly every unit, like the
 *    punctuation and grammar features of a real SAE.
 *  - one stem feature keyed on the first four bytes of the lowercased word,
 *    shared by words of one morphological family.
 *  - the rest from a hash stream seeded with the token and up to
 *    `context_window` preceding tokens.
 *
 * Stem and contextual values are scaled by a gain in [0.6, 1.6] keyed on the
 * word's two-byte ending, and stay below the surface values.
 */
class BuiltinExtractor final : public FeatureExtractor {
 public:
  explicit BuiltinExtractor(BuiltinExtractorConfig config = {}) : config_(config) {
    require(config_.active_per_token >= 3, Errc::invalid_argument,
            "builtin extractor needs at least 3 active features per token");
    require(config_.surface_band >= 1 &&
                config_.dim >= config_.surface_band + 4 * config_.active_per_token,
            Errc::invalid_argument, "builtin extractor dim too small for its active count");
  }

  std::string id() const override {
    return "builtin-v1/dim=" + std::to_string(config_.dim) +
           "/active=" + std::to_string(config_.active_per_token) +
           "/context=" + std::to_string(config_.context_window) +
           "/surface=" + std::to_string(config_.surface_band);
  }

  std::uint32_t dim() const override { return config_.dim; }
  const BuiltinExtractorConfig& config() const { return config_; }

  ActivationMatrix extract(std::string_view unit_text) const override {
    const auto tokens = tokenize(unit_text);
    if (tokens.empty()) throw Error(Errc::empty_unit, "unit has no tokens");
    ActivationMatrix out;
    out.dim = config_.dim;
    out.rows.reserve(tokens.size());
    for (std::size_t j = 0; j < tokens.size(); ++j) {
      const std::size_t first = j >= config_.context_window ? j - config_.context_window : 0;
      out.rows.push_back(token_row(tokens[j].text, std::span(tokens).subspan(first, j - first)));
    }
    return out;
  }

  // Exposed for tests.
  static double gain(std::string_view token) {
    const std::string_view core = word_core(token);
    const std::string_view tail = core.size() >= 2 ? core.substr(core.size() - 2) : core;
    return 0.6 + to_unit_interval(hash_bytes(tail, kGainSalt));
  }

 private:
  static constexpr std::uint64_t kSurfaceSalt = 0x5355524641434531ull;
  static constexpr std::uint64_t kStemSalt = 0x5354454d53414c54ull;
  static constexpr std::uint64_t kGainSalt = 0x4741494e53414c54ull;
  static constexpr std::uint64_t kContextSalt = 0x434f4e5445585431ull;

  static bool is_ascii_punct(char c) {
    return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
           (c >= '{' && c <= '~');
  }

  // Token with leading and trailing ASCII punctuation removed; the token
  // itself when nothing else is left.
  static std::string_view word_core(std::string_view token) {
    std::size_t b = 0, e = token.size();
    while (b < e && is_ascii_punct(token[b])) ++b;
    while (e > b && is_ascii_punct(token[e - 1])) --e;
    return b == e ? token : token.substr(b, e - b);
  }

  SparseRow token_row(std::string_view token, std::span<const Token> context) const {
    const std::uint32_t band = config_.surface_band;
    const std::uint32_t content_span = config_.dim - band;
    const double g = gain(token);

    std::vector<std::pair<FeatureIndex, double>> entries;
    entries.reserve(config_.active_per_token);
    auto taken = [&](FeatureIndex i) {
      return std::any_of(entries.begin(), entries.end(), [&](const auto& e) { return e.first == i; });
    };

    const std::uint64_t surface = hash_bytes(token, kSurfaceSalt);
    entries.emplace_back(static_cast<FeatureIndex>(surface % band),
                         0.9 + 0.1 * to_unit_interval_open_low(mix64(surface)));

    const std::string stem = detail::ascii_lower(word_core(token).substr(0, 4));
    const std::uint64_t stem_hash = hash_bytes(stem, kStemSalt);
    const double stem_value =
        g * (0.35 + 0.2 * to_unit_interval_open_low(hash_bytes(token, kStemSalt)));
    entries.emplace_back(band + static_cast<FeatureIndex>(stem_hash % content_span), stem_value);

    std::uint64_t seed = kFnvOffset ^ kContextSalt;
    for (const Token& prev : context) {
      seed = fnv1a(prev.text, seed);
      seed = fnv1a(std::string_view("\x1f", 1), seed);
    }
    seed = fnv1a(token, seed);
    HashStream stream(mix64(seed));
    while (entries.size() < config_.active_per_token) {
      const std::uint64_t x = stream.next();
      const auto index = band + static_cast<FeatureIndex>(x % content_span);
      if (taken(index)) continue;
      entries.emplace_back(index, g * (0.02 + 0.48 * to_unit_interval_open_low(stream.next())));
    }

    std::sort(entries.begin(), entries.end());
    SparseRow row;
    row.indices.reserve(entries.size());
    row.values.reserve(entries.size());
    for (const auto& [i, v] : entries) {
      row.indices.push_back(i);
      row.values.push_back(v);
    }
    return row;
  }

  BuiltinExtractorConfig config_;
};

namespace detail {
inline FeatureIndex lowest_unmasked(const BackgroundMask& mask) {
  FeatureIndex i = 0;
  for (FeatureIndex excluded : mask.excluded()) {
    if (excluded != i) break;
    ++i;
  }
  return i;
}
}  // namespace detail

/// Sorted, deduplicated strongest unmasked feature of every token (lowest
/// index on ties). Throws AllMasked when no token has an unmasked active
/// feature.
inline std::vector<FeatureIndex> salient_features(const ActivationMatrix& acts,
                                                  const BackgroundMask& mask) {
  require(mask.dim() == acts.dim, Errc::invalid_argument, "mask dim differs from activation dim");
  std::vector<FeatureIndex> salient;
  salient.reserve(acts.rows.size());
  bool any_unmasked = false;
  for (const SparseRow& row : acts.rows) {
    double best = -std::numeric_limits<double>::infinity();
    FeatureIndex best_index = 0;
    bool found = false;
    for (std::size_t k = 0; k < row.indices.size(); ++k) {
      if (mask.contains(row.indices[k])) continue;
      // Indices ascend, so strict '>' keeps the lowest index on ties.
      if (row.values[k] > best) {
        best = row.values[k];
        best_index = row.indices[k];
        found = true;
      }
    }
    if (found) {
      salient.push_back(best_index);
      any_unmasked = true;
    } else {
      // Every active feature masked: the dense argmax lands on an inactive
      // (zero) entry, the lowest unmasked index.
      salient.push_back(detail::lowest_unmasked(mask));
    }
  }
  if (!any_unmasked) throw Error(Errc::all_masked, "every active feature is masked");
  std::sort(salient.begin(), salient.end());
  salient.erase(std::unique(salient.begin(), salient.end()), salient.end());
  return salient;
}

/*!
 * Feature Concentration Score: the share of total activation mass carried by
 * the salient set (see salient_features). The denominator is the full L1
 * mass of every token, masked features included.
 */
inline double compute_fcs(const ActivationMatrix& acts, const BackgroundMask& mask) {
  require(!acts.rows.empty(), Errc::empty_unit, "activation matrix has no tokens");
  require(mask.dim() == acts.dim, Errc::invalid_argument, "mask dim differs from activation dim");
  double total_mass = 0.0;
  for (const SparseRow& row : acts.rows) total_mass += row.l1();
  if (!(total_mass > 0.0)) throw Error(Errc::zero_mass, "total activation mass is zero");

  const auto salient = salient_features(acts, mask);
  double salient_mass = 0.0;
  for (const SparseRow& row : acts.rows) {
    for (std::size_t k = 0; k < row.indices.size(); ++k) {
      if (std::binary_search(salient.begin(), salient.end(), row.indices[k])) {
        salient_mass += row.values[k];
      }
    }
  }
  return salient_mass / total_mass;
}

/// Mean activation vector with masked features zeroed.
inline std::vector<double> masked_mean_features(const ActivationMatrix& acts,
                                                const BackgroundMask& mask) {
  require(!acts.rows.empty(), Errc::empty_unit, "activation matrix has no tokens");
  std::vector<double> mean(acts.dim, 0.0);
  const double scale = 1.0 / static_cast<double>(acts.rows.size());
  for (const SparseRow& row : acts.rows) {
    for (std::size_t k = 0; k < row.indices.size(); ++k) {
      if (!mask.contains(row.indices[k])) mean[row.indices[k]] += row.values[k] * scale;
    }
  }
  return mean;
}

/// The per-unit scalar the whole pipeline steers and tests: FCS of the
/// extractor's activations.
inline double statistic(std::string_view unit_text, const FeatureExtractor& extractor,
                        const BackgroundMask& mask) {
  return compute_fcs(extractor.extract(unit_text), mask);
}

inline double statistic(const Unit& unit, const FeatureExtractor& extractor,
                        const BackgroundMask& mask) {
  return statistic(unit.text, extractor, mask);
}

}  // namespace featuremark
