// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "featuremark/errors.hpp"
#include "featuremark/hash.hpp"
#include "featuremark/random.hpp"
#include "featuremark/text_units.hpp"

namespace featuremark {

struct GenerationRequest {
  std::string context;
  std::size_t n = 1;
  double temperature = 0.7;
  std::size_t max_new_tokens = 20;
  /// Only meaningful to deterministic generators.
  std::uint64_t trial_seed = 0;
};

/// Source of candidate continuations.
class GeneratorAdapter {
 public:
  virtual ~GeneratorAdapter() = default;
  virtual std::string id() const = 0;
  virtual bool supports_parallel() const = 0;
  /// Returns exactly `request.n` raw continuations of `request.context`.
  virtual std::vector<std::string> generate(const GenerationRequest& request) = 0;
};

struct SimulatedGeneratorConfig {
  std::uint32_t families = 256;
  std::uint32_t family_size = 16;
  std::size_t min_tokens = 5;
  std::size_t max_tokens = 20;
  /// Probability that a word carries the position's shared suffix.
  double register_stickiness = 0.85;
  /// Upper end of the per-candidate topic focus, drawn uniformly from [0, this).
  double max_focus = 1.0;
  std::uint64_t vocabulary_seed = 0x766f636162756c61ull;
};

/*!
 * Seeded sentence fabricator over a synthetic 4,096-word vocabulary.
 *
 * Words are a four-letter family stem plus a body syllable (256 families of
 * 16 words), written with one of 16 two-letter suffixes. Each call fixes a
 * suffix ("register") shared by all candidates, drawn from the context and
 * trial seed. Each candidate then picks a topic family and a focus level: a
 * word comes from the topic family with probability `focus`, otherwise from a
 * Zipf law sharpened by the temperature.
 *
 * Output is a pure function of (context, candidate index, trial seed,
 * temperature, max_new_tokens).
 */
class SimulatedGenerator final : public GeneratorAdapter {
 public:
  explicit SimulatedGenerator(SimulatedGeneratorConfig config = {}) : config_(config) {
    require(config_.families >= 1 && config_.family_size >= 1 && config_.family_size <= 16,
            Errc::invalid_argument, "simulated vocabulary shape out of range");
    require(config_.min_tokens >= 1 && config_.min_tokens <= config_.max_tokens,
            Errc::invalid_argument, "simulated sentence length range is empty");
    build_vocabulary();
  }

  std::string id() const override { return "simulated-v1"; }
  bool supports_parallel() const override { return true; }

  std::vector<std::string> generate(const GenerationRequest& request) override {
    return generate_const(request);
  }

  std::vector<std::string> generate_const(const GenerationRequest& request) const {
    require(request.n >= 1, Errc::invalid_argument, "candidate count must be positive");
    require(request.temperature > 0.0, Errc::invalid_argument, "temperature must be positive");
    const auto cdf = zipf_cdf(request.temperature);
    const std::uint64_t base = hash_combine(hash_bytes(request.context, kContextSalt),
                                            request.trial_seed);
    const std::size_t reg = mix64(base) % kSuffixes.size();
    std::vector<std::string> out;
    out.reserve(request.n);
    for (std::size_t c = 0; c < request.n; ++c) {
      CounterStream rng(base, c);
      out.push_back(sentence(rng, reg, cdf, request.max_new_tokens));
    }
    return out;
  }

  /// Synonyms for every written word form: other words of the same family
  /// carrying the same suffix.
  std::map<std::string, std::vector<std::string>> synonym_table(std::size_t per_word = 3) const {
    std::map<std::string, std::vector<std::string>> table;
    const std::uint32_t fs = config_.family_size;
    for (std::uint32_t w = 0; w < words_.size(); ++w) {
      const std::uint32_t fam = w / fs;
      for (std::string_view suffix : kSuffixes) {
        auto& syns = table[words_[w] + std::string(suffix)];
        for (std::size_t k = 1; k <= per_word && k < fs; ++k) {
          syns.push_back(words_[fam * fs + (w % fs + k) % fs] + std::string(suffix));
        }
      }
    }
    return table;
  }

  const std::vector<std::string>& base_words() const { return words_; }
  const SimulatedGeneratorConfig& config() const { return config_; }

 private:
  static constexpr std::uint64_t kContextSalt = 0x53494d434f4e5458ull;
  static constexpr std::string_view kConsonants = "bdfgklmnprstvzhj";
  static constexpr std::string_view kVowels = "aeio";
  static constexpr std::array<std::string_view, 16> kSuffixes = {
      "al", "an", "ed", "en", "er", "es", "ic", "in", "is", "ly", "on", "or", "um", "us", "ar", "et"};

  void build_vocabulary() {
    const std::uint32_t n = config_.families * config_.family_size;
    require(config_.families <= 4096, Errc::invalid_argument, "too many simulated families");
    words_.clear();
    words_.reserve(n);
    for (std::uint32_t f = 0; f < config_.families; ++f) {
      // Odd multiplier keeps stems distinct across families.
      const std::uint32_t x = (f * 1031u + 5u) % 4096u;
      std::string stem;
      stem += kConsonants[x % 16];
      stem += kVowels[(x / 16) % 4];
      stem += kConsonants[(x / 64) % 16];
      stem += kVowels[(x / 1024) % 4];
      for (std::uint32_t m = 0; m < config_.family_size; ++m) {
        words_.push_back(stem + kConsonants[m] + kVowels[(m + f) % 4]);
      }
    }
    // Frequency rank -> word id.
    rank_to_word_.resize(n);
    for (std::uint32_t i = 0; i < n; ++i) rank_to_word_[i] = i;
    CounterStream rng(config_.vocabulary_seed);
    partial_shuffle(std::span<std::uint32_t>(rank_to_word_), n, rng);
  }

  std::vector<double> zipf_cdf(double temperature) const {
    std::vector<double> cdf(rank_to_word_.size());
    double acc = 0.0;
    for (std::size_t r = 0; r < cdf.size(); ++r) {
      acc += std::pow(static_cast<double>(r + 1), -1.0 / temperature);
      cdf[r] = acc;
    }
    for (double& c : cdf) c /= acc;
    return cdf;
  }

  std::string sentence(CounterStream& rng, std::size_t reg, const std::vector<double>& cdf,
                       std::size_t max_new_tokens) const {
    const std::size_t hi = std::max<std::size_t>(1, std::min(config_.max_tokens, max_new_tokens));
    const std::size_t lo = std::min(config_.min_tokens, hi);
    const std::size_t length = lo + uniform_below(rng, hi - lo + 1);
    const std::uint32_t topic = static_cast<std::uint32_t>(uniform_below(rng, config_.families));
    const double focus = config_.max_focus * uniform01(rng);

    std::string out;
    for (std::size_t j = 0; j < length; ++j) {
      std::uint32_t w;
      if (uniform01(rng) < focus) {
        w = topic * config_.family_size +
            static_cast<std::uint32_t>(uniform_below(rng, config_.family_size));
      } else {
        const double u = uniform01(rng);
        const auto rank = std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin();
        w = rank_to_word_[std::min<std::size_t>(rank, cdf.size() - 1)];
      }
      const std::size_t suffix = uniform01(rng) < config_.register_stickiness
                                     ? reg
                                     : uniform_below(rng, kSuffixes.size());
      std::string word = words_[w] + std::string(kSuffixes[suffix]);
      if (j == 0) word[0] = static_cast<char>(word[0] - 'a' + 'A');
      if (!out.empty()) out += ' ';
      out += word;
    }
    out += '.';
    return out;
  }

  SimulatedGeneratorConfig config_;
  std::vector<std::string> words_;
  std::vector<std::uint32_t> rank_to_word_;
};

/// Asks the generator for `n` continuations and trims each to its first unit.
inline std::vector<std::string> generate_candidates(GeneratorAdapter& gen, std::string_view context,
                                                    std::size_t n, double temperature,
                                                    std::size_t max_new_tokens,
                                                    std::uint64_t trial_seed,
                                                    DomainKind kind = DomainKind::natural_language) {
  require(n >= 1, Errc::invalid_argument, "candidate count must be positive");
  GenerationRequest req{std::string(context), n, temperature, max_new_tokens, trial_seed};
  auto raw = gen.generate(req);
  if (raw.size() != n) {
    throw Error(Errc::generator_unavailable, "generator returned " + std::to_string(raw.size()) +
                                                 " candidates, expected " + std::to_string(n));
  }
  for (std::string& c : raw) {
    const bool blank = std::all_of(c.begin(), c.end(), [](char ch) {
      return is_space(static_cast<unsigned char>(ch));
    });
    if (blank) continue;
    const auto units = segment_text(c, kind, kPipelineSegmentation);
    c = units.front().text;
  }
  return raw;
}

/// Unwatermarked text: `units` units, each the generator's first candidate
/// given the prompt and everything before it.
inline std::string natural_text(GeneratorAdapter& gen, std::string_view prompt, std::size_t units,
                                std::uint64_t seed, double temperature = 0.7,
                                std::size_t max_new_tokens = 20,
                                DomainKind kind = DomainKind::natural_language) {
  const std::string_view joiner = unit_joiner(kind);
  std::string context(prompt);
  std::string text;
  for (std::size_t i = 0; i < units; ++i) {
    const std::string unit = generate_candidates(gen, context, 1, temperature, max_new_tokens,
                                                 hash_combine(seed, i), kind)
                                 .front();
    if (!context.empty()) context += joiner;
    context += unit;
    if (!text.empty()) text += joiner;
    text += unit;
  }
  return text;
}

}  // namespace featuremark
