// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "featuremark/embed.hpp"
#include "featuremark/harness.hpp"

namespace fm = featuremark;

namespace {

// Reads the target statistic from the text itself ("0.35" has FCS 0.35);
// "empty" is unscoreable.
class ScriptedExtractor final : public fm::FeatureExtractor {
 public:
  std::string id() const override { return "scripted"; }
  std::uint32_t dim() const override { return 64; }
  fm::ActivationMatrix extract(std::string_view text) const override {
    if (text == "empty") throw fm::Error(fm::Errc::empty_unit, "scripted empty");
    const double x = std::stod(std::string(text));
    fm::SparseRow row{{0}, {x}};
    const std::size_t rest = static_cast<std::size_t>(std::ceil((1.0 - x) / x)) + 1;
    for (std::size_t k = 1; k <= rest; ++k) {
      row.indices.push_back(static_cast<std::uint32_t>(k));
      row.values.push_back((1.0 - x) / static_cast<double>(rest));
    }
    return {64, {row}};
  }
};

fm::CalibrationModel percent_model() {
  fm::CalibrationModel m;
  m.extractor_id = "scripted";
  for (int i = 1; i <= 99; ++i) m.sorted_samples.push_back(i / 100.0);
  m.mu = 0.5;
  m.sigma = 0.29;
  m.mask = fm::BackgroundMask::none(64);
  return m;
}

// Returns scripted candidate lists.
class ListGenerator final : public fm::GeneratorAdapter {
 public:
  explicit ListGenerator(std::vector<std::string> items) : items_(std::move(items)) {}
  std::string id() const override { return "list"; }
  bool supports_parallel() const override { return false; }
  std::vector<std::string> generate(const fm::GenerationRequest& r) override {
    std::vector<std::string> out;
    for (std::size_t i = 0; i < r.n; ++i) out.push_back(items_[i % items_.size()]);
    return out;
  }

 private:
  std::vector<std::string> items_;
};

class SimulatedEmbed : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fm::EvalConfig config;
    config.calibration_units = 2000;
    env_ = new fm::Environment(fm::make_environment(config));
  }
  static void TearDownTestSuite() { delete env_; }
  static inline fm::Environment* env_ = nullptr;
};

}  // namespace

TEST(SelectCandidate, NearestWins) {
  ScriptedExtractor ex;
  const auto model = percent_model();
  const fm::Pipeline p(ex, model);
  const std::vector<std::string> c = {"0.2", "0.5", "0.9"};
  const auto sel = fm::select_candidate(c, 0.48, p);
  EXPECT_EQ(sel.index, 1u);
  EXPECT_DOUBLE_EQ(sel.z, 0.5);
  const std::vector<std::string> one = {"0.9"};
  EXPECT_EQ(fm::select_candidate(one, 0.05, p).index, 0u);
}

TEST(SelectCandidate, SkipsUnscoreableAndEarliestOnTies) {
  ScriptedExtractor ex;
  const auto model = percent_model();
  const fm::Pipeline p(ex, model);
  const std::vector<std::string> c = {"empty", "0.7", "0.3", "0.7"};
  EXPECT_EQ(fm::select_candidate(c, 0.69, p).index, 1u);
  const std::vector<std::string> none = {"empty", "empty"};
  try {
    fm::select_candidate(none, 0.5, p);
    FAIL();
  } catch (const fm::Error& e) {
    EXPECT_EQ(e.code(), fm::Errc::all_candidates_unscoreable);
  }
}

TEST(Embed, StructuralContractWithSingleCandidate) {
  ScriptedExtractor ex;
  const auto model = percent_model();
  const fm::Pipeline p(ex, model);
  ListGenerator gen({"0.5"});
  fm::EmbedParams params;
  params.n_candidates = 1;
  params.attempts = 1;
  const fm::WatermarkKey key{7, fm::Message::parse("1")};
  const auto r = fm::embed("prompt", key, gen, p, params);
  EXPECT_EQ(r.per_unit.size(), 10u);
  EXPECT_EQ(r.units.size(), 10u);
  EXPECT_FALSE(r.aligned);
  EXPECT_EQ(r.attempts_used, 1u);
  EXPECT_EQ(r.timing.generator_calls, 10u);
  const auto targets = fm::targets_from_key(key, 10);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(r.per_unit[i].target, targets[i]);
    EXPECT_EQ(r.per_unit[i].candidates_seen, 1u);
  }
}

TEST(Embed, ParameterValidation) {
  fm::EmbedParams p;
  p.units = 1;
  EXPECT_THROW(p.validate(), fm::Error);
  p = {};
  p.attempts = 0;
  EXPECT_THROW(p.validate(), fm::Error);
}

TEST_F(SimulatedEmbed, CandidatesAreDeterministic) {
  auto& gen = *env_->generator;
  const auto a = fm::generate_candidates(gen, "ctx", 50, 0.7, 20, 11);
  const auto b = fm::generate_candidates(gen, "ctx", 50, 0.7, 20, 11);
  EXPECT_EQ(a, b);
  EXPECT_EQ(a.size(), 50u);
  EXPECT_EQ(fm::generate_candidates(gen, "ctx", 1, 0.7, 20, 11).size(), 1u);
  EXPECT_NE(a, fm::generate_candidates(gen, "ctx", 50, 0.7, 20, 12));
}

TEST_F(SimulatedEmbed, EndToEndDeterministicAndSelectionOnly) {
  const auto p = env_->pipeline();
  const auto key = fm::message_to_key(fm::Message::parse("1"), env_->secret);
  fm::EmbedParams params;
  params.seed = 5;
  std::vector<std::vector<std::string>> final_lists(10);
  std::size_t last_attempt = 0;
  const auto a = fm::embed("Prompt.", key, *env_->generator, p, params,
                           [&](std::size_t attempt, std::size_t pos, std::span<const std::string> c,
                               std::size_t chosen) {
                             last_attempt = attempt;
                             final_lists[pos].assign(c.begin(), c.end());
                             EXPECT_LT(chosen, c.size());
                           });
  const auto b = fm::embed("Prompt.", key, *env_->generator, p, params);
  EXPECT_EQ(a.text, b.text);
  EXPECT_EQ(a.units, b.units);
  EXPECT_EQ(last_attempt + 1, a.attempts_used);
  std::string joined;
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_NE(std::find(final_lists[i].begin(), final_lists[i].end(), a.units[i]),
              final_lists[i].end());
    EXPECT_EQ(final_lists[i][a.per_unit[i].chosen_index], a.units[i]);
    joined += (i ? " " : "") + a.units[i];
  }
  EXPECT_EQ(a.text, joined);
  EXPECT_EQ(a.text.find("Prompt."), std::string::npos);
}

TEST_F(SimulatedEmbed, AlignsInMostTrials) {
  const auto p = env_->pipeline();
  const auto keys = fm::enumerate_keys(4, env_->secret);
  int aligned = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    fm::EmbedParams params;
    params.seed = fm::hash_combine(1234, i);
    aligned += fm::embed("P" + std::to_string(i), keys[i % keys.size()], *env_->generator, p, params)
                       .aligned
                   ? 1
                   : 0;
  }
  EXPECT_GE(aligned, 190);
}

TEST_F(SimulatedEmbed, ResidualShrinksWithMoreCandidates) {
  const auto p = env_->pipeline();
  const auto key = fm::message_to_key(fm::Message::parse("0"), env_->secret);
  auto mean_residual = [&](std::size_t n) {
    double total = 0.0;
    for (std::uint64_t i = 0; i < 20; ++i) {
      fm::EmbedParams params;
      params.n_candidates = n;
      params.attempts = 1;
      params.seed = i;
      for (const auto& u : fm::embed("P", key, *env_->generator, p, params).per_unit) total += u.residual;
    }
    return total;
  };
  EXPECT_GT(mean_residual(1), mean_residual(10));
  EXPECT_GT(mean_residual(10), mean_residual(50));
}
