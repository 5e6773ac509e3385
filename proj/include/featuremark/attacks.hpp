// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "featuremark/errors.hpp"
#include "featuremark/random.hpp"
#include "featuremark/text_units.hpp"
#include "featuremark/tokenize.hpp"

namespace featuremark {

enum class AttackKind { word_deletion, synonym_substitution };

struct AttackSpec {
  AttackKind kind = AttackKind::word_deletion;
  double intensity = 0.0;
  bool keep_structure = true;
  std::uint64_t rng_seed = 0;

  void validate() const {
    require(intensity >= 0.0 && intensity <= 0.5, Errc::invalid_argument,
            "attack intensity must lie in [0, 0.5]");
  }
};

inline std::string_view to_string(AttackKind k) {
  return k == AttackKind::word_deletion ? "word_deletion" : "synonym_substitution";
}

namespace detail {

// Rebuilds `text` without the tokens flagged in `drop`. A dropped token takes
// the whitespace before it, or the whitespace after it when nothing kept
// precedes it.
inline std::string drop_tokens(std::string_view text, const std::vector<Token>& tokens,
                               const std::vector<bool>& drop) {
  if (tokens.empty()) return std::string(text);
  std::string out(text.substr(0, tokens.front().byte_start));
  bool emitted = false;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (drop[i]) continue;
    if (emitted) {
      const std::size_t gap_begin = i == 0 ? tokens[i].byte_start : tokens[i - 1].byte_end;
      out += text.substr(gap_begin, tokens[i].byte_start - gap_begin);
    }
    out += tokens[i].text;
    emitted = true;
  }
  out += text.substr(tokens.back().byte_end);
  return out;
}

inline std::size_t attack_budget(double intensity, std::size_t words) {
  return static_cast<std::size_t>(std::floor(intensity * static_cast<double>(words) + 1e-9));
}

}  // namespace detail

/*!
 * Removes floor(intensity * words) words picked by a seeded shuffle.
 *
 * With keep_structure, the first and the last token of every unit are never
 * removed and no unit is cut below the pipeline's minimum unit length, so
 * the unit count is preserved. Fewer words are removed when the budget
 * exceeds what those rules allow.
 */
inline std::string delete_words(std::string_view text, const AttackSpec& spec,
                                DomainKind kind = DomainKind::natural_language) {
  spec.validate();
  require(spec.kind == AttackKind::word_deletion, Errc::invalid_argument,
          "delete_words needs a word_deletion spec");
  const auto tokens = tokenize(text);
  const std::size_t budget = detail::attack_budget(spec.intensity, tokens.size());
  if (budget == 0) return std::string(text);

  // unit_of[i]: unit index of token i; only needed to protect structure.
  std::vector<std::size_t> unit_of(tokens.size(), 0);
  std::vector<std::size_t> remaining;
  std::vector<bool> is_protected(tokens.size(), false);
  if (spec.keep_structure) {
    const auto units = segment_text(text, kind, kPipelineSegmentation);
    remaining.assign(units.size(), 0);
    std::size_t u = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      while (u + 1 < units.size() && tokens[i].byte_start >= units[u].byte_end) ++u;
      unit_of[i] = u;
      ++remaining[u];
    }
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i == 0 || unit_of[i - 1] != unit_of[i]) is_protected[i] = true;
      if (i + 1 == tokens.size() || unit_of[i + 1] != unit_of[i]) is_protected[i] = true;
    }
  }

  std::vector<std::size_t> order;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!is_protected[i]) order.push_back(i);
  }
  CounterStream rng(spec.rng_seed, 0x64656c);
  partial_shuffle(std::span<std::size_t>(order), order.size(), rng);

  std::vector<bool> drop(tokens.size(), false);
  std::size_t removed = 0;
  for (std::size_t i : order) {
    if (removed == budget) break;
    if (spec.keep_structure) {
      if (remaining[unit_of[i]] <= kPipelineMinUnitTokens) continue;
      --remaining[unit_of[i]];
    }
    drop[i] = true;
    ++removed;
  }
  return detail::drop_tokens(text, tokens, drop);
}

/// Lowercased word -> replacement candidates.
class Lexicon {
 public:
  Lexicon() = default;
  explicit Lexicon(std::map<std::string, std::vector<std::string>> entries)
      : entries_(std::move(entries)) {
    std::erase_if(entries_, [](const auto& kv) { return kv.second.empty(); });
  }

  /// Parses `word<TAB>syn1,syn2,...` lines; blank lines and '#' comments are skipped.
  static Lexicon parse(std::istream& in) {
    std::map<std::string, std::vector<std::string>> entries;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto tab = line.find('\t');
      if (tab == std::string::npos || tab == 0) {
        throw Error(Errc::config_invalid, "lexicon line " + std::to_string(line_no) +
                                              " is not word<TAB>synonyms");
      }
      auto& syns = entries[detail::ascii_lower(std::string_view(line).substr(0, tab))];
      std::string_view rest = std::string_view(line).substr(tab + 1);
      while (!rest.empty()) {
        const auto comma = rest.find(',');
        const std::string_view item = rest.substr(0, comma);
        if (!item.empty()) syns.emplace_back(item);
        if (comma == std::string_view::npos) break;
        rest.remove_prefix(comma + 1);
      }
    }
    return Lexicon(std::move(entries));
  }

  static Lexicon load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::io_error, "cannot open lexicon " + path.string());
    return parse(in);
  }

  const std::vector<std::string>* find(std::string_view word) const {
    const auto it = entries_.find(detail::ascii_lower(word));
    return it == entries_.end() ? nullptr : &it->second;
  }

  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, std::vector<std::string>> entries_;
};

namespace detail {

inline bool is_word_punct(char c) {
  return (c >= '!' && c <= '/') || (c >= ':' && c <= '@') || (c >= '[' && c <= '`') ||
         (c >= '{' && c <= '~');
}

struct WordCore {
  std::size_t begin;  // offsets within the token
  std::size_t end;
};

inline WordCore core_of(std::string_view token) {
  std::size_t b = 0, e = token.size();
  while (b < e && is_word_punct(token[b])) ++b;
  while (e > b && is_word_punct(token[e - 1])) --e;
  return {b, e};
}

inline std::string match_case(std::string_view original, std::string replacement) {
  if (!original.empty() && !replacement.empty()) {
    const char o = original.front();
    char& r = replacement.front();
    if (o >= 'A' && o <= 'Z' && r >= 'a' && r <= 'z') r = static_cast<char>(r - 'a' + 'A');
    if (o >= 'a' && o <= 'z' && r >= 'A' && r <= 'Z') r = static_cast<char>(r - 'A' + 'a');
  }
  return replacement;
}

// Replaces the word core of each chosen token with `pick(i, core)`.
template <class Pick>
std::string replace_cores(std::string_view text, const std::vector<Token>& tokens,
                          const std::vector<std::size_t>& chosen, Pick&& pick) {
  std::vector<std::string> replacement(tokens.size());
  std::vector<bool> touched(tokens.size(), false);
  for (std::size_t i : chosen) {
    const WordCore c = core_of(tokens[i].text);
    const std::string_view core = tokens[i].text.substr(c.begin, c.end - c.begin);
    std::string rep = pick(i, core);
    if (rep.empty()) continue;
    replacement[i] = std::string(tokens[i].text.substr(0, c.begin)) + match_case(core, rep) +
                     std::string(tokens[i].text.substr(c.end));
    touched[i] = true;
  }
  std::string out;
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (!touched[i]) continue;
    out += text.substr(cursor, tokens[i].byte_start - cursor);
    out += replacement[i];
    cursor = tokens[i].byte_end;
  }
  out += text.substr(cursor);
  return out;
}

}  // namespace detail

/// Replaces min(floor(intensity * words), covered words) lexicon-covered words
/// with a seeded choice among their synonyms. Surrounding punctuation and the
/// case of the first letter are kept.
inline std::string substitute_synonyms(std::string_view text, const AttackSpec& spec,
                                       const Lexicon& lexicon) {
  spec.validate();
  require(spec.kind == AttackKind::synonym_substitution, Errc::invalid_argument,
          "substitute_synonyms needs a synonym_substitution spec");
  if (lexicon.empty()) throw Error(Errc::empty_lexicon, "synonym lexicon is empty");
  const auto tokens = tokenize(text);
  const std::size_t budget = detail::attack_budget(spec.intensity, tokens.size());
  if (budget == 0) return std::string(text);

  std::vector<std::size_t> covered;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const auto c = detail::core_of(tokens[i].text);
    if (c.end > c.begin && lexicon.find(tokens[i].text.substr(c.begin, c.end - c.begin))) {
      covered.push_back(i);
    }
  }
  CounterStream rng(spec.rng_seed, 0x73796e);
  const std::size_t k = std::min(budget, covered.size());
  partial_shuffle(std::span<std::size_t>(covered), k, rng);
  covered.resize(k);
  std::sort(covered.begin(), covered.end());
  return detail::replace_cores(text, tokens, covered, [&](std::size_t, std::string_view core) {
    const auto& syns = *lexicon.find(core);
    return syns[uniform_below(rng, syns.size())];
  });
}

/// Hook for an external (e.g. context-aware) substituter: given the full
/// text, a token index and its word, returns the replacement, or an empty
/// string to leave the word alone.
using Substituter =
    std::function<std::string(std::string_view text, std::size_t token_index, std::string_view word)>;

inline std::string substitute_with(std::string_view text, const AttackSpec& spec,
                                   const Substituter& substituter) {
  spec.validate();
  require(static_cast<bool>(substituter), Errc::invalid_argument, "substituter is empty");
  const auto tokens = tokenize(text);
  const std::size_t budget = detail::attack_budget(spec.intensity, tokens.size());
  if (budget == 0) return std::string(text);
  std::vector<std::size_t> order(tokens.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  CounterStream rng(spec.rng_seed, 0x686f6f6b);
  partial_shuffle(std::span<std::size_t>(order), budget, rng);
  order.resize(budget);
  std::sort(order.begin(), order.end());
  return detail::replace_cores(text, tokens, order, [&](std::size_t i, std::string_view core) {
    return substituter(text, i, core);
  });
}

/// Dispatches on spec.kind. `lexicon` is only read for substitution.
inline std::string apply_attack(std::string_view text, const AttackSpec& spec,
                                const Lexicon* lexicon = nullptr,
                                DomainKind kind = DomainKind::natural_language) {
  if (spec.kind == AttackKind::word_deletion) return delete_words(text, spec, kind);
  if (lexicon == nullptr) throw Error(Errc::empty_lexicon, "synonym attack needs a lexicon");
  return substitute_synonyms(text, spec, *lexicon);
}

}  // namespace featuremark
