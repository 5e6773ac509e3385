// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "featuremark/harness.hpp"

namespace fm = featuremark;
namespace fs = std::filesystem;

namespace {

fm::Errc config_error(const char* text) {
  try {
    fm::eval_config_from_json(nlohmann::json::parse(text));
  } catch (const fm::Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "accepted: " << text;
  return fm::Errc::invalid_argument;
}

fs::path temp_file(const std::string& name, const std::string& content) {
  const auto p = fs::temp_directory_path() / ("featuremark_harness_" + name);
  std::ofstream(p) << content;
  return p;
}

fm::EvalConfig small_config() {
  fm::EvalConfig c;
  c.trials = 24;
  c.bits = 2;
  c.calibration_units = 400;
  c.embed.units = 8;
  c.max_fpr = 0.05;
  return c;
}

}  // namespace

TEST(ParallelFor, VisitsEachIndexOnce) {
  for (std::size_t threads : {std::size_t{1}, std::size_t{3}, std::size_t{0}}) {
    std::vector<std::atomic<int>> hits(1000);
    fm::parallel_for(hits.size(), threads, [&](std::size_t i) { ++hits[i]; });
    for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
  }
  fm::parallel_for(0, 4, [](std::size_t) { FAIL(); });
}

TEST(ParallelFor, RethrowsWorkerFailure) {
  EXPECT_THROW(fm::parallel_for(100, 4,
                                [](std::size_t i) {
                                  if (i == 37) throw std::runtime_error("boom");
                                }),
               std::runtime_error);
}

TEST(EvalConfig, ParsesFieldsAndKeepsDefaults) {
  const auto c = fm::eval_config_from_json(nlohmann::json::parse(R"({
    "trials": 10, "bits": 3, "alpha": 0.05, "correction": "bonferroni",
    "embed": {"n_candidates": 7, "units": 12},
    "thresholds": {"r_min": 0.9, "r_max": 1.1, "o_min": 0.9},
    "attacks": [{"kind": "word_deletion", "intensity": 0.2},
                {"kind": "synonym_substitution", "intensity": 0.1, "rng_seed": 5}],
    "truncate_units": 7
  })"));
  EXPECT_EQ(c.trials, 10u);
  EXPECT_EQ(c.negatives(), 10u);
  EXPECT_EQ(c.bits, 3u);
  EXPECT_EQ(c.detect.correction, fm::Correction::bonferroni);
  EXPECT_EQ(c.embed.n_candidates, 7u);
  EXPECT_EQ(c.embed.units, 12u);
  EXPECT_EQ(c.embed.attempts, 15u);
  EXPECT_DOUBLE_EQ(c.detect.thresholds.r_min, 0.9);
  EXPECT_DOUBLE_EQ(c.embed.thresholds.o_min, 0.9);
  ASSERT_EQ(c.attacks.size(), 2u);
  EXPECT_EQ(c.attacks[1].kind, fm::AttackKind::synonym_substitution);
  EXPECT_EQ(c.attacks[1].rng_seed, 5u);
  EXPECT_TRUE(c.attacks[0].keep_structure);
  EXPECT_EQ(c.truncate_units, 7u);
}

TEST(EvalConfig, RejectsInvalidDocuments) {
  for (const char* bad : {
           R"({"trials": 0})",
           R"({"bits": 17})",
           R"({"alpha": 1.5})",
           R"({"correction": "holm"})",
           R"({"embed": {"units": 1}})",
           R"({"thresholds": {"r_min": 1.2}})",
           R"({"attacks": [{"kind": "paraphrase"}]})",
           R"({"attacks": [{"kind": "word_deletion", "intensity": 0.9}]})",
           R"({"corpus": {"source": "file"}})",
           R"({"corpus": {"source": "web"}})",
           R"({"trials": "many"})",
           R"({"truncate_units": 2})",
           R"({"calibration_units": 10})",
       }) {
    EXPECT_EQ(config_error(bad), fm::Errc::config_invalid) << bad;
  }
  const auto broken = temp_file("broken.json", "{not json");
  try {
    fm::load_eval_config(broken);
    FAIL();
  } catch (const fm::Error& e) {
    EXPECT_EQ(e.code(), fm::Errc::config_invalid);
  }
  try {
    fm::load_eval_config("/nonexistent/config.json");
    FAIL();
  } catch (const fm::Error& e) {
    EXPECT_EQ(e.code(), fm::Errc::io_error);
  }
}

TEST(Corpus, ReadsJsonlAndRejectsBadLines) {
  const auto good = temp_file("good.jsonl",
                              "{\"prompt\": \"p1\", \"reference\": \"r1\"}\n\n"
                              "{\"prompt\": \"p2\"}\n");
  const auto recs = fm::read_jsonl_corpus(good);
  ASSERT_EQ(recs.size(), 2u);
  EXPECT_EQ(recs[0].reference, "r1");
  EXPECT_EQ(recs[1].prompt, "p2");
  EXPECT_EQ(recs[1].reference, "");
  for (const char* bad : {"{\"prompt\": 1}\n", "not json\n", "\n\n"}) {
    try {
      fm::read_jsonl_corpus(temp_file("bad.jsonl", bad));
      FAIL() << bad;
    } catch (const fm::Error& e) {
      EXPECT_EQ(e.code(), fm::Errc::config_invalid);
    }
  }
}

TEST(FirstUnits, KeepsSeparatorsAndShortTexts) {
  const std::string s = "One two three.  Four five six.\nSeven eight nine. Ten eleven twelve.";
  EXPECT_EQ(fm::first_units(s, 2, fm::DomainKind::natural_language),
            "One two three.  Four five six.");
  EXPECT_EQ(fm::first_units(s, 9, fm::DomainKind::natural_language), s);
}

TEST(Harness, FileCorpusCalibratesOnReferences) {
  std::string lines;
  fm::SimulatedGenerator gen;
  for (int i = 0; i < 40; ++i) {
    const auto text = fm::natural_text(gen, "ref " + std::to_string(i), 5, i);
    lines += nlohmann::json{{"prompt", "Prompt " + std::to_string(i) + "."}, {"reference", text}}.dump() + "\n";
  }
  auto c = small_config();
  c.corpus = fm::CorpusSource::file;
  c.corpus_path = temp_file("corpus.jsonl", lines);
  const auto env = fm::make_environment(c);
  EXPECT_EQ(env.corpus.size(), 40u);
  EXPECT_EQ(env.model.sorted_samples.size(), 200u);
  EXPECT_EQ(fm::trial_prompt(env, 41), "Prompt 1.");
}

TEST(Harness, SmallEvaluationIsDeterministic) {
  const auto c = small_config();
  const auto env = fm::make_environment(c);
  const auto a = fm::evaluate_detection(c, env);
  auto c4 = c;
  c4.threads = 4;
  const auto b = fm::evaluate_detection(c4, env);
  EXPECT_EQ(a.confusion.tp, b.confusion.tp);
  EXPECT_EQ(a.confusion.fp, b.confusion.fp);
  EXPECT_EQ(a.threshold, b.threshold);
  EXPECT_EQ(a.exact_message_accuracy, b.exact_message_accuracy);
  const auto pa = fs::temp_directory_path() / "featuremark_harness_roc_a.csv";
  const auto pb = fs::temp_directory_path() / "featuremark_harness_roc_b.csv";
  fm::write_roc_csv(pa, a.roc);
  fm::write_roc_csv(pb, b.roc);
  std::stringstream sa, sb;
  sa << std::ifstream(pa).rdbuf();
  sb << std::ifstream(pb).rdbuf();
  EXPECT_EQ(sa.str(), sb.str());
  EXPECT_EQ(a.positives, 24u);
  EXPECT_LE(a.fpr, c.max_fpr);
  EXPECT_GT(a.auc, 0.8);
  EXPECT_GT(a.aligned_rate, 0.5);
  const auto j = fm::to_json(a);
  EXPECT_EQ(j.at("confusion").at("tp").get<std::size_t>(), a.confusion.tp);
}

TEST(Harness, AttackEvalNeedsAttacksAndLexicon) {
  auto c = small_config();
  c.trials = 6;
  const auto env = fm::make_environment(c);
  try {
    fm::run_attack_eval(c, env);
    FAIL();
  } catch (const fm::Error& e) {
    EXPECT_EQ(e.code(), fm::Errc::config_invalid);
  }
  c.attacks = {{fm::AttackKind::synonym_substitution, 0.1, true, 0}};
  try {
    fm::run_attack_eval(c, env);
    FAIL();
  } catch (const fm::Error& e) {
    EXPECT_EQ(e.code(), fm::Errc::config_invalid);
  }
  c.attacks = {{fm::AttackKind::word_deletion, 0.0, true, 0},
               {fm::AttackKind::word_deletion, 0.3, true, 0}};
  const auto cells = fm::run_attack_eval(c, env);
  ASSERT_EQ(cells.size(), 2u);
  const auto clean = fm::evaluate_detection(c, env);
  EXPECT_EQ(cells[0].report.auc, clean.auc);
  EXPECT_EQ(cells[0].report.confusion.tp, clean.confusion.tp);
}
