// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "featuremark/calibration.hpp"
#include "featuremark/detect.hpp"
#include "featuremark/errors.hpp"
#include "featuremark/generator.hpp"
#include "featuremark/hash.hpp"
#include "featuremark/keying.hpp"

namespace featuremark {

struct EmbedParams {
  std::size_t n_candidates = 50;
  std::size_t units = 10;
  std::size_t attempts = 15;
  double temperature = 0.7;
  std::size_t max_new_tokens = 20;
  AlignmentThresholds thresholds;
  /// Passed (mixed with attempt and position) to the generator as trial seed.
  std::uint64_t seed = 0;

  void validate() const {
    require(n_candidates >= 1, Errc::invalid_argument, "N must be at least 1");
    require(units >= 2, Errc::invalid_argument, "M must be at least 2");
    require(attempts >= 1, Errc::invalid_argument, "K must be at least 1");
    require(temperature > 0.0, Errc::invalid_argument, "temperature must be positive");
    thresholds.validate();
  }
};

struct UnitAudit {
  double target = 0.0;
  double achieved = 0.0;
  double residual = 0.0;
  std::size_t candidates_seen = 0;
  std::size_t chosen_index = 0;
};

struct EmbedTiming {
  double generator_seconds = 0.0;
  double pipeline_seconds = 0.0;
  std::size_t generator_calls = 0;
};

struct EmbedResult {
  /// Generated units joined by the domain's joiner; the prompt is not included.
  std::string text;
  std::vector<std::string> units;
  std::vector<UnitAudit> per_unit;
  std::size_t attempts_used = 0;
  bool aligned = false;
  EmbedTiming timing;
};

struct Selection {
  std::size_t index = 0;
  double z = 0.0;
};

/// Candidate whose normalized statistic is nearest `target`; earliest on ties.
/// Candidates the pipeline cannot score are skipped.
inline Selection select_candidate(std::span<const std::string> candidates, double target,
                                  const Pipeline& pipeline) {
  require(!candidates.empty(), Errc::invalid_argument, "no candidates to select from");
  std::optional<Selection> best;
  double best_gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    double z;
    try {
      z = pipeline.z(candidates[i]);
    } catch (const Error& e) {
      if (e.code() == Errc::empty_unit || e.code() == Errc::all_masked ||
          e.code() == Errc::zero_mass) {
        continue;
      }
      throw;
    }
    const double gap = std::abs(z - target);
    if (gap < best_gap) {
      best_gap = gap;
      best = Selection{i, z};
    }
  }
  if (!best) throw Error(Errc::all_candidates_unscoreable, "no candidate could be scored");
  return *best;
}

/// Called once per unit position with the full candidate list.
using CandidateObserver = std::function<void(std::size_t attempt, std::size_t position,
                                             std::span<const std::string> candidates,
                                             std::size_t chosen)>;

/*!
 * Best-of-N embedding. For each attempt, builds `units` units in order, each
 * the candidate nearest its target given the prompt and the units chosen so
 * far. Returns the first attempt that passes alignment, otherwise the last
 * attempt with aligned = false. Targets depend on the key only.
 */
inline EmbedResult embed(std::string_view prompt, const WatermarkKey& key, GeneratorAdapter& gen,
                         const Pipeline& pipeline, const EmbedParams& params = {},
                         const CandidateObserver& observer = {}) {
  params.validate();
  using clock = std::chrono::steady_clock;
  const auto targets = targets_from_key(key, params.units);
  const std::string_view joiner = unit_joiner(pipeline.kind);

  EmbedResult result;
  for (std::size_t attempt = 0; attempt < params.attempts; ++attempt) {
    std::string context(prompt);
    std::vector<std::string> units;
    std::vector<UnitAudit> audit;
    std::vector<double> z;
    const std::uint64_t attempt_seed = hash_combine(params.seed, attempt);
    for (std::size_t i = 0; i < params.units; ++i) {
      const auto t0 = clock::now();
      auto cands = generate_candidates(gen, context, params.n_candidates, params.temperature,
                                       params.max_new_tokens, hash_combine(attempt_seed, i),
                                       pipeline.kind);
      const auto t1 = clock::now();
      const Selection sel = select_candidate(cands, targets[i], pipeline);
      const auto t2 = clock::now();
      result.timing.generator_seconds += std::chrono::duration<double>(t1 - t0).count();
      result.timing.pipeline_seconds += std::chrono::duration<double>(t2 - t1).count();
      ++result.timing.generator_calls;
      if (observer) observer(attempt, i, cands, sel.index);

      audit.push_back({targets[i], sel.z, std::abs(sel.z - targets[i]), cands.size(), sel.index});
      z.push_back(sel.z);
      if (!context.empty()) context += joiner;
      context += cands[sel.index];
      units.push_back(std::move(cands[sel.index]));
    }
    const auto t3 = clock::now();
    const bool aligned = check_alignment(targets, z, params.thresholds);
    result.timing.pipeline_seconds +=
        std::chrono::duration<double>(clock::now() - t3).count();
    result.units = std::move(units);
    result.per_unit = std::move(audit);
    result.attempts_used = attempt + 1;
    result.aligned = aligned;
    if (aligned) break;
  }
  result.text.clear();
  for (const std::string& u : result.units) {
    if (!result.text.empty()) result.text += joiner;
    result.text += u;
  }
  return result;
}

}  // namespace featuremark
