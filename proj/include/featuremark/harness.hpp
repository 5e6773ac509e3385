// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "featuremark/attacks.hpp"
#include "featuremark/calibration.hpp"
#include "featuremark/detect.hpp"
#include "featuremark/embed.hpp"
#include "featuremark/features.hpp"
#include "featuremark/generator.hpp"
#include "featuremark/keying.hpp"
#include "featuremark/metrics.hpp"

namespace featuremark {

/// Runs fn(i) for i in [0, n) on up to `threads` workers (0 = hardware).
/// Each index is processed exactly once; results must go to per-index slots.
inline void parallel_for(std::size_t n, std::size_t threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n, 1));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> workers;
  workers.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    workers.emplace_back([&] {
      for (std::size_t i; (i = next.fetch_add(1)) < n;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  if (failure) std::rethrow_exception(failure);
}

struct CorpusRecord {
  std::string prompt;
  std::string reference;
};

/// One JSON object per line with string fields "prompt" and "reference".
inline std::vector<CorpusRecord> read_jsonl_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open corpus " + path.string());
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      out.push_back({j.value("prompt", std::string()), j.value("reference", std::string())});
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::config_invalid,
                  "corpus line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.empty()) throw Error(Errc::config_invalid, "corpus " + path.string() + " is empty");
  return out;
}

enum class CorpusSource { simulated, file };

struct EvalConfig {
  std::size_t trials = 200;
  /// Unwatermarked texts; 0 means the same as trials.
  std::size_t null_trials = 0;
  std::size_t bits = 1;
  EmbedParams embed;
  DetectOptions detect;
  std::vector<AttackSpec> attacks;
  CorpusSource corpus = CorpusSource::simulated;
  std::filesystem::path corpus_path;
  std::size_t calibration_units = 2000;
  double df_threshold = kDefaultDfThreshold;
  std::uint64_t master_seed = 1;
  std::size_t threads = 0;
  /// Detect on the first `truncate_units` units only; 0 keeps the full text.
  std::size_t truncate_units = 0;
  double max_fpr = 0.01;
  std::filesystem::path lexicon_path;

  std::size_t negatives() const { return null_trials == 0 ? trials : null_trials; }

  void validate() const {
    auto check = [](bool ok, const char* what) {
      if (!ok) throw Error(Errc::config_invalid, what);
    };
    check(trials >= 1, "trials must be at least 1");
    check(bits >= 1 && bits <= kMaxEnumerableBits, "bits must lie in [1, 16]");
    check(embed.n_candidates >= 1 && embed.units >= 2 && embed.attempts >= 1,
          "embed parameters need N >= 1, M >= 2, K >= 1");
    check(detect.alpha > 0.0 && detect.alpha < 1.0, "alpha must lie in (0, 1)");
    check(df_threshold > 0.0 && df_threshold <= 1.0, "df_threshold must lie in (0, 1]");
    check(calibration_units >= kMinCalibrationUnits, "calibration needs at least 100 units");
    check(max_fpr > 0.0 && max_fpr < 1.0, "max_fpr must lie in (0, 1)");
    check(truncate_units == 0 || truncate_units >= 3, "truncate_units must be 0 or >= 3");
    check(corpus == CorpusSource::simulated || !corpus_path.empty(),
          "file corpus needs corpus_path");
    for (const auto& a : attacks) {
      check(a.intensity >= 0.0 && a.intensity <= 0.5, "attack intensity must lie in [0, 0.5]");
    }
    try {
      embed.thresholds.validate();
      detect.thresholds.validate();
    } catch (const Error& e) {
      throw Error(Errc::config_invalid, e.what());
    }
  }
};

namespace detail {

template <class T>
void read_opt(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

inline AttackKind parse_attack_kind(const std::string& s) {
  if (s == "word_deletion") return AttackKind::word_deletion;
  if (s == "synonym_substitution") return AttackKind::synonym_substitution;
  throw Error(Errc::config_invalid, "unknown attack kind '" + s + "'");
}

inline void read_thresholds(const nlohmann::json& j, AlignmentThresholds& th) {
  read_opt(j, "r_min", th.r_min);
  read_opt(j, "r_max", th.r_max);
  read_opt(j, "o_min", th.o_min);
}

}  // namespace detail

/// Reads an EvalConfig; absent fields keep their defaults.
inline EvalConfig eval_config_from_json(const nlohmann::json& j) {
  EvalConfig c;
  try {
    detail::read_opt(j, "trials", c.trials);
    detail::read_opt(j, "null_trials", c.null_trials);
    detail::read_opt(j, "bits", c.bits);
    detail::read_opt(j, "alpha", c.detect.alpha);
    detail::read_opt(j, "master_seed", c.master_seed);
    detail::read_opt(j, "threads", c.threads);
    detail::read_opt(j, "calibration_units", c.calibration_units);
    detail::read_opt(j, "df_threshold", c.df_threshold);
    detail::read_opt(j, "truncate_units", c.truncate_units);
    detail::read_opt(j, "max_fpr", c.max_fpr);
    if (j.contains("correction")) {
      const auto s = j.at("correction").get<std::string>();
      if (s == "none") c.detect.correction = Correction::none;
      else if (s == "bonferroni") c.detect.correction = Correction::bonferroni;
      else throw Error(Errc::config_invalid, "unknown correction '" + s + "'");
    }
    if (j.contains("embed")) {
      const auto& e = j.at("embed");
      detail::read_opt(e, "n_candidates", c.embed.n_candidates);
      detail::read_opt(e, "units", c.embed.units);
      detail::read_opt(e, "attempts", c.embed.attempts);
      detail::read_opt(e, "temperature", c.embed.temperature);
      detail::read_opt(e, "max_new_tokens", c.embed.max_new_tokens);
    }
    if (j.contains("thresholds")) {
      detail::read_thresholds(j.at("thresholds"), c.embed.thresholds);
      c.detect.thresholds = c.embed.thresholds;
    }
    if (j.contains("corpus")) {
      const auto& cj = j.at("corpus");
      const auto src = cj.value("source", std::string("simulated"));
      if (src == "simulated") c.corpus = CorpusSource::simulated;
      else if (src == "file") c.corpus = CorpusSource::file;
      else throw Error(Errc::config_invalid, "unknown corpus source '" + src + "'");
      if (cj.contains("path")) c.corpus_path = cj.at("path").get<std::string>();
    }
    if (j.contains("lexicon")) c.lexicon_path = j.at("lexicon").get<std::string>();
    if (j.contains("attacks")) {
      for (const auto& a : j.at("attacks")) {
        AttackSpec s;
        s.kind = detail::parse_attack_kind(a.at("kind").get<std::string>());
        detail::read_opt(a, "intensity", s.intensity);
        detail::read_opt(a, "keep_structure", s.keep_structure);
        detail::read_opt(a, "rng_seed", s.rng_seed);
        c.attacks.push_back(s);
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::config_invalid, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline EvalConfig load_eval_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io_error, "cannot open config " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return eval_config_from_json(nlohmann::json::parse(buf.str()));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::config_invalid, std::string("config: ") + e.what());
  }
}

/// Extractor, generator, calibration and key material shared by every trial.
struct Environment {
  std::shared_ptr<const FeatureExtractor> extractor;
  std::shared_ptr<GeneratorAdapter> generator;
  CalibrationModel model;
  Secret secret;
  std::vector<CorpusRecord> corpus;  // empty for the simulated source
  DomainKind kind = DomainKind::natural_language;

  Pipeline pipeline() const { return Pipeline(*extractor, model, kind); }
};

inline constexpr std::uint64_t kCalibrationSalt = 0x43414c4942524154ull;
inline constexpr std::uint64_t kNullSalt = 0x4e554c4c54455854ull;
inline constexpr std::uint64_t kMessageSalt = 0x4d45535341474553ull;

/// `count` simulated natural units, each generated from a fresh context.
inline std::vector<Unit> simulated_units(GeneratorAdapter& gen, std::size_t count,
                                         std::uint64_t seed, double temperature = 0.7,
                                         std::size_t max_new_tokens = 20) {
  std::vector<Unit> units;
  units.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto text = generate_candidates(gen, "unit " + std::to_string(i), 1, temperature,
                                    max_new_tokens, hash_combine(seed, i))
                    .front();
    const std::size_t size = text.size();
    units.push_back({std::move(text), 0, size, UnitKind::sentence});
  }
  return units;
}

/// Builds the environment described by `config`: built-in extractor,
/// simulated generator unless one is supplied, and a freshly fit calibration.
inline Environment make_environment(const EvalConfig& config,
                                    std::shared_ptr<GeneratorAdapter> generator = nullptr) {
  config.validate();
  Environment env;
  env.extractor = std::make_shared<BuiltinExtractor>();
  env.generator = generator ? std::move(generator) : std::make_shared<SimulatedGenerator>();
  env.secret = Secret::from_seed(hash_combine(config.master_seed, kMessageSalt));

  std::vector<Unit> calibration;
  if (config.corpus == CorpusSource::file) {
    env.corpus = read_jsonl_corpus(config.corpus_path);
    for (const auto& rec : env.corpus) {
      if (rec.reference.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      for (auto& u : segment_text(rec.reference, env.kind, kPipelineSegmentation)) {
        calibration.push_back(std::move(u));
      }
    }
  } else {
    calibration = simulated_units(*env.generator, config.calibration_units,
                                  hash_combine(config.master_seed, kCalibrationSalt),
                                  config.embed.temperature, config.embed.max_new_tokens);
  }
  env.model = fit(calibration, *env.extractor, {config.df_threshold, "1970-01-01T00:00:00Z"});
  return env;
}

/// Watermarked and unwatermarked material for one trial.
struct TrialTexts {
  Message message;
  EmbedResult embedded;
  std::string null_text;
};

inline std::string trial_prompt(const Environment& env, std::size_t i) {
  if (!env.corpus.empty()) return env.corpus[i % env.corpus.size()].prompt;
  return "Simulated prompt " + std::to_string(i) + ".";
}

/// Embeds `config.trials` random messages and produces `config.negatives()`
/// unwatermarked texts. Trial i depends only on (master_seed, i).
inline std::vector<TrialTexts> generate_trials(const EvalConfig& config, const Environment& env,
                                               const std::vector<WatermarkKey>& keys) {
  const std::size_t n = std::max(config.trials, config.negatives());
  std::vector<TrialTexts> out(n);
  const Pipeline pipeline = env.pipeline();
  const std::size_t threads = env.generator->supports_parallel() ? config.threads : 1;
  parallel_for(n, threads, [&](std::size_t i) {
    const std::uint64_t seed = hash_combine(config.master_seed, i);
    const std::string prompt = trial_prompt(env, i);
    if (i < config.trials) {
      CounterStream rng(seed, 1);
      const auto value = uniform_below(rng, keys.size());
      out[i].message = keys[value].message;
      EmbedParams params = config.embed;
      params.seed = seed;
      out[i].embedded = embed(prompt, keys[value], *env.generator, pipeline, params);
    }
    if (i < config.negatives()) {
      if (!env.corpus.empty() && !env.corpus[i % env.corpus.size()].reference.empty()) {
        out[i].null_text = env.corpus[i % env.corpus.size()].reference;
      } else {
        out[i].null_text = natural_text(*env.generator, prompt, config.embed.units,
                                        hash_combine(seed, kNullSalt), config.embed.temperature,
                                        config.embed.max_new_tokens, env.kind);
      }
    }
  });
  return out;
}

/// First `count` units of `text` with their original separators.
inline std::string first_units(std::string_view text, std::size_t count, DomainKind kind) {
  const auto units = segment_text(text, kind, kPipelineSegmentation);
  if (units.size() <= count) return std::string(text);
  return std::string(text.substr(units.front().byte_start,
                                 units[count - 1].byte_end - units.front().byte_start));
}

struct LatencySummary {
  double generator_seconds = 0.0;  // per watermarked text
  double embed_pipeline_seconds = 0.0;
  double detect_seconds = 0.0;  // per detected text
  double generator_calls = 0.0;
};

struct MetricsReport {
  std::size_t positives = 0;
  std::size_t negatives = 0;
  double threshold = 0.0;
  Confusion confusion;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double fpr = 0.0;
  double auc = 0.0;
  std::vector<RocPoint> roc;
  /// Share of watermarked texts whose decision is exactly the embedded message.
  double exact_message_accuracy = 0.0;
  double null_reject_rate = 0.0;
  double aligned_rate = 0.0;
  double mean_attempts = 0.0;
  double mean_residual = 0.0;
  LatencySummary latency;
};

/// Per-text outcome of detection.
struct ScoredText {
  double score = 0.0;
  bool rejected = true;
  std::optional<Message> decision;
};

using TextTransform = std::function<std::string(std::string_view text, std::size_t trial, bool null)>;

inline ScoredText score_text(std::string_view text, const std::vector<WatermarkKey>& keys,
                             const Pipeline& pipeline, const DetectOptions& options) {
  ScoredText s;
  std::vector<double> z;
  try {
    z = observe(text, pipeline);
  } catch (const Error& e) {
    if (e.code() != Errc::empty_input && e.code() != Errc::empty_unit &&
        e.code() != Errc::all_masked && e.code() != Errc::zero_mass) {
      throw;
    }
  }
  if (z.size() < 3) {
    s.score = -1e9;
    return s;
  }
  const auto report = detect_normalized(std::move(z), keys, options);
  s.score = report.ranking_score();
  s.rejected = report.rejected();
  s.decision = report.decision;
  return s;
}

/// Detects every (optionally transformed) text and reduces to a report.
inline MetricsReport evaluate_trials(const EvalConfig& config, const Environment& env,
                                     const std::vector<WatermarkKey>& keys,
                                     const std::vector<TrialTexts>& trials,
                                     const TextTransform& transform = {}) {
  const Pipeline pipeline = env.pipeline();
  const std::size_t npos = config.trials, nneg = config.negatives();
  std::vector<ScoredText> pos(npos), neg(nneg);
  std::vector<double> detect_seconds(npos + nneg, 0.0);
  auto prepare = [&](std::string_view text, std::size_t i, bool null) {
    std::string t = transform ? transform(text, i, null) : std::string(text);
    if (config.truncate_units > 0) t = first_units(t, config.truncate_units, env.kind);
    return t;
  };
  parallel_for(npos + nneg, config.threads, [&](std::size_t k) {
    const auto t0 = std::chrono::steady_clock::now();
    if (k < npos) {
      pos[k] = score_text(prepare(trials[k].embedded.text, k, false), keys, pipeline, config.detect);
    } else {
      const std::size_t i = k - npos;
      neg[i] = score_text(prepare(trials[i].null_text, i, true), keys, pipeline, config.detect);
    }
    detect_seconds[k] =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  MetricsReport r;
  r.positives = npos;
  r.negatives = nneg;
  std::vector<double> ps, ns;
  std::size_t exact = 0, rejects = 0, aligned = 0;
  double attempts = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < npos; ++i) {
    ps.push_back(pos[i].score);
    if (pos[i].decision && *pos[i].decision == trials[i].message) ++exact;
    const auto& e = trials[i].embedded;
    aligned += e.aligned ? 1 : 0;
    attempts += static_cast<double>(e.attempts_used);
    for (const auto& u : e.per_unit) residual += u.residual / static_cast<double>(e.per_unit.size());
    r.latency.generator_seconds += e.timing.generator_seconds;
    r.latency.embed_pipeline_seconds += e.timing.pipeline_seconds;
    r.latency.generator_calls += static_cast<double>(e.timing.generator_calls);
  }
  for (const auto& s : neg) {
    ns.push_back(s.score);
    rejects += s.rejected ? 1 : 0;
  }
  const double np = static_cast<double>(npos), nn = static_cast<double>(nneg);
  const auto op = operating_point(ps, ns, config.max_fpr);
  r.threshold = op.threshold;
  r.confusion = op.confusion;
  r.accuracy = op.confusion.accuracy();
  r.precision = op.confusion.precision();
  r.recall = op.confusion.recall();
  r.f1 = op.confusion.f1();
  r.fpr = op.confusion.fpr();
  r.auc = auc(ps, ns);
  r.roc = roc_curve(ps, ns);
  r.exact_message_accuracy = static_cast<double>(exact) / np;
  r.null_reject_rate = static_cast<double>(rejects) / nn;
  r.aligned_rate = static_cast<double>(aligned) / np;
  r.mean_attempts = attempts / np;
  r.mean_residual = residual / np;
  r.latency.generator_seconds /= np;
  r.latency.embed_pipeline_seconds /= np;
  r.latency.generator_calls /= np;
  double total_detect = 0.0;
  for (double d : detect_seconds) total_detect += d;
  r.latency.detect_seconds = total_detect / (np + nn);
  return r;
}

/// Embeds, detects and reports the metric suite for one configuration.
inline MetricsReport evaluate_detection(const EvalConfig& config, const Environment& env) {
  config.validate();
  const auto keys = enumerate_keys(config.bits, env.secret);
  const auto trials = generate_trials(config, env, keys);
  return evaluate_trials(config, env, keys, trials);
}

inline MetricsReport evaluate_detection(const EvalConfig& config) {
  return evaluate_detection(config, make_environment(config));
}

struct AttackCell {
  AttackSpec spec;
  MetricsReport report;
};

/// One report per attack spec; the same watermarked and unwatermarked texts
/// are attacked in every cell, each text with its own derived seed.
inline std::vector<AttackCell> run_attack_eval(const EvalConfig& config, const Environment& env) {
  config.validate();
  if (config.attacks.empty()) throw Error(Errc::config_invalid, "no attacks configured");
  std::optional<Lexicon> lexicon;
  const bool needs_lexicon =
      std::any_of(config.attacks.begin(), config.attacks.end(),
                  [](const AttackSpec& a) { return a.kind == AttackKind::synonym_substitution; });
  if (needs_lexicon) {
    if (config.lexicon_path.empty()) {
      throw Error(Errc::config_invalid, "synonym attacks need a lexicon path");
    }
    lexicon = Lexicon::load(config.lexicon_path);
  }
  const auto keys = enumerate_keys(config.bits, env.secret);
  const auto trials = generate_trials(config, env, keys);
  std::vector<AttackCell> cells;
  for (const AttackSpec& spec : config.attacks) {
    const TextTransform attack = [&](std::string_view text, std::size_t i, bool null) {
      AttackSpec s = spec;
      s.rng_seed = hash_combine(hash_combine(spec.rng_seed, i), null ? 1 : 0);
      return apply_attack(text, s, lexicon ? &*lexicon : nullptr, env.kind);
    };
    cells.push_back({spec, evaluate_trials(config, env, keys, trials, attack)});
  }
  return cells;
}

inline nlohmann::json to_json(const MetricsReport& r) {
  return {{"positives", r.positives},
          {"negatives", r.negatives},
          {"threshold", r.threshold},
          {"accuracy", r.accuracy},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"fpr", r.fpr},
          {"auc", r.auc},
          {"confusion",
           {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn},
            {"fn", r.confusion.fn}}},
          {"exact_message_accuracy", r.exact_message_accuracy},
          {"null_reject_rate", r.null_reject_rate},
          {"aligned_rate", r.aligned_rate},
          {"mean_attempts", r.mean_attempts},
          {"mean_residual", r.mean_residual},
          {"latency",
           {{"generator_seconds", r.latency.generator_seconds},
            {"embed_pipeline_seconds", r.latency.embed_pipeline_seconds},
            {"detect_seconds", r.latency.detect_seconds},
            {"generator_calls", r.latency.generator_calls}}}};
}

}  // namespace featuremark
