// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "featuremark/errors.hpp"
#include "featuremark/tokenize.hpp"

namespace featuremark {

enum class DomainKind { natural_language, code };

enum class UnitKind { sentence, code_block };

/// One watermark-carrying span of a document. `text` is the exact byte range
/// [byte_start, byte_end) of the source.
struct Unit {
  std::string text;
  std::size_t byte_start = 0;
  std::size_t byte_end = 0;
  UnitKind kind = UnitKind::sentence;

  friend bool operator==(const Unit&, const Unit&) = default;
};

struct SegmentOptions {
  /// Units with fewer tokens are merged into the following unit (or the
  /// preceding one when they end the document). 1 disables merging.
  std::size_t min_tokens = 1;
};

/// Minimum unit length used everywhere the statistic is computed (embedding,
/// detection, attacks).
inline constexpr std::size_t kPipelineMinUnitTokens = 3;

inline constexpr SegmentOptions kPipelineSegmentation{kPipelineMinUnitTokens};

namespace detail {

// Lowercase forms, terminal period included.
inline constexpr std::array<std::string_view, 24> kAbbreviations = {
    "mr.",  "mrs.", "ms.",  "dr.",  "prof.", "sr.",  "jr.",    "st.",
    "vs.",  "etc.", "e.g.", "i.e.", "inc.",  "ltd.", "co.",    "no.",
    "fig.", "eq.",  "al.",  "cf.",  "approx.", "dept.", "u.s.", "mt.",
};

inline bool is_ascii_terminator(char32_t cp) { return cp == '.' || cp == '!' || cp == '?'; }

inline bool is_wide_terminator(char32_t cp) {
  return cp == 0x3002 || cp == 0xFF01 || cp == 0xFF1F;  // 。！？
}

inline bool is_closer(char32_t cp) {
  return cp == '"' || cp == '\'' || cp == ')' || cp == ']' || cp == 0x201D || cp == 0x2019 ||
         cp == 0x300D || cp == 0x300F || cp == 0xFF09;
}

inline std::string ascii_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  }
  return out;
}

// True when the '.' ending at `dot` closes a guarded abbreviation or a
// single-letter initial ("J.").
inline bool is_abbreviation(std::string_view text, std::size_t dot) {
  std::size_t begin = dot;
  while (begin > 0) {
    const char c = text[begin - 1];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '(' || c == '"') break;
    --begin;
  }
  const std::string word = ascii_lower(text.substr(begin, dot + 1 - begin));
  if (std::find(kAbbreviations.begin(), kAbbreviations.end(), word) != kAbbreviations.end()) {
    return true;
  }
  return word.size() == 2 && text[begin] >= 'A' && text[begin] <= 'Z';
}

struct Span {
  std::size_t begin;
  std::size_t end;
};

inline std::vector<Span> sentence_spans(std::string_view text) {
  std::vector<Span> spans;
  std::size_t pos = 0;
  std::size_t start = std::string_view::npos;
  auto close = [&](std::size_t end) {
    if (start != std::string_view::npos) spans.push_back({start, end});
    start = std::string_view::npos;
  };
  while (pos < text.size()) {
    const auto [cp, len] = utf8::decode(text, pos);
    if (is_space(cp)) {
      pos += len;
      continue;
    }
    if (start == std::string_view::npos) start = pos;
    if (!is_ascii_terminator(cp) && !is_wide_terminator(cp)) {
      pos += len;
      continue;
    }
    // Consume a run of terminators ("?!", "...") and any closing quotes.
    std::size_t end = pos + len;
    bool wide = is_wide_terminator(cp);
    while (end < text.size()) {
      const auto next = utf8::decode(text, end);
      if (is_ascii_terminator(next.code_point) || is_wide_terminator(next.code_point)) {
        wide = wide || is_wide_terminator(next.code_point);
      } else if (!is_closer(next.code_point)) {
        break;
      }
      end += next.length;
    }
    const bool at_break = end == text.size() || is_space(utf8::decode(text, end).code_point);
    const bool single_dot = cp == '.' && end == pos + 1;
    if ((wide || at_break) && !(single_dot && is_abbreviation(text, pos))) close(end);
    pos = end;
  }
  if (start != std::string_view::npos) {
    std::size_t end = text.size();
    while (end > start && is_space(static_cast<unsigned char>(text[end - 1]))) --end;
    close(end);
  }
  return spans;
}

inline std::size_t leading_indent(std::string_view line) {
  std::size_t n = 0;
  while (n < line.size() && (line[n] == ' ' || line[n] == '\t')) ++n;
  return n;
}

inline bool is_blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\f' || c == '\v';
  });
}

// Lines at column 0 that continue the previous block rather than start one.
inline bool continues_block(std::string_view line) {
  static constexpr std::array<std::string_view, 9> kContinuations = {
      "}", ")", "]", "else", "elif", "except", "finally", "catch", "end"};
  return std::any_of(kContinuations.begin(), kContinuations.end(),
                     [&](std::string_view k) { return line.starts_with(k); });
}

inline std::vector<Span> code_spans(std::string_view text) {
  struct Line {
    std::size_t begin;
    std::size_t end;  // excludes '\n'
  };
  std::vector<Line> lines;
  for (std::size_t pos = 0; pos <= text.size();) {
    const std::size_t nl = text.find('\n', pos);
    const std::size_t end = nl == std::string_view::npos ? text.size() : nl;
    lines.push_back({pos, end});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }

  std::vector<Span> spans;
  std::size_t block_begin = std::string_view::npos;
  std::size_t block_end = 0;
  bool blank_since_last = false;
  std::size_t last_indent = 0;
  for (const Line& line : lines) {
    const std::string_view body = text.substr(line.begin, line.end - line.begin);
    if (is_blank(body)) {
      blank_since_last = true;
      continue;
    }
    const std::size_t indent = leading_indent(body);
    const bool top_level = indent == 0 && !continues_block(body);
    const bool boundary = block_begin != std::string_view::npos && top_level &&
                          (blank_since_last || last_indent > 0);
    if (boundary) {
      spans.push_back({block_begin, block_end});
      block_begin = std::string_view::npos;
    }
    if (block_begin == std::string_view::npos) block_begin = line.begin;
    std::size_t end = line.end;
    while (end > line.begin && is_space(static_cast<unsigned char>(text[end - 1]))) --end;
    block_end = end;
    last_indent = indent;
    blank_since_last = false;
  }
  if (block_begin != std::string_view::npos) spans.push_back({block_begin, block_end});
  return spans;
}

inline std::vector<Span> merge_short(std::string_view text, std::vector<Span> spans,
                                     std::size_t min_tokens) {
  if (min_tokens <= 1 || spans.size() < 2) return spans;
  std::vector<Span> out;
  std::size_t pending = std::string_view::npos;  // start of a short prefix awaiting merge
  for (const Span& s : spans) {
    const std::size_t begin = pending == std::string_view::npos ? s.begin : pending;
    if (count_tokens(text.substr(begin, s.end - begin)) < min_tokens) {
      pending = begin;
      continue;
    }
    out.push_back({begin, s.end});
    pending = std::string_view::npos;
  }
  if (pending != std::string_view::npos) {
    if (out.empty()) {
      out.push_back({pending, spans.back().end});
    } else {
      out.back().end = spans.back().end;
    }
  }
  return out;
}

}  // namespace detail

/// Splits `text` into ordered, non-overlapping units.
///
/// Natural language breaks after `.` `!` `?` followed by whitespace or end of
/// input (guarding common abbreviations), and after `。` `！` `？`
/// unconditionally. Code breaks before a column-0 line that follows a blank
/// line or an indented line.
inline std::vector<Unit> segment_text(std::string_view text, DomainKind kind,
                                      SegmentOptions options = {}) {
  const bool blank = std::all_of(text.begin(), text.end(), [](char c) {
    return is_space(static_cast<unsigned char>(c));
  });
  if (blank) throw Error(Errc::empty_input, "text is empty or whitespace-only");

  auto spans = kind == DomainKind::code ? detail::code_spans(text) : detail::sentence_spans(text);
  spans = detail::merge_short(text, std::move(spans), options.min_tokens);

  const UnitKind unit_kind = kind == DomainKind::code ? UnitKind::code_block : UnitKind::sentence;
  std::vector<Unit> units;
  units.reserve(spans.size());
  for (const auto& s : spans) {
    units.push_back({std::string(text.substr(s.begin, s.end - s.begin)), s.begin, s.end, unit_kind});
  }
  return units;
}

/// The bytes around and between units: leading, one per gap, trailing
/// (size |units| + 1).
inline std::vector<std::string> separators_of(std::string_view source,
                                              std::span<const Unit> units) {
  std::vector<std::string> seps;
  seps.reserve(units.size() + 1);
  std::size_t cursor = 0;
  for (const Unit& u : units) {
    require(u.byte_start >= cursor && u.byte_end <= source.size() && u.byte_start < u.byte_end,
            Errc::invalid_argument, "units are not ordered spans of the source");
    seps.emplace_back(source.substr(cursor, u.byte_start - cursor));
    cursor = u.byte_end;
  }
  seps.emplace_back(source.substr(cursor));
  return seps;
}

/// Inverse of segmentation. `separators` holds either the |units| - 1 gaps, or
/// the gaps plus leading and trailing text (|units| + 1).
inline std::string reassemble(std::span<const Unit> units, std::span<const std::string> separators) {
  if (units.empty()) throw Error(Errc::empty_input, "no units to reassemble");
  const bool with_edges = separators.size() == units.size() + 1;
  if (!with_edges && separators.size() + 1 != units.size()) {
    throw Error(Errc::length_mismatch, "separator count must be |units|-1 or |units|+1");
  }
  std::string out;
  std::size_t next_sep = 0;
  if (with_edges) out += separators[next_sep++];
  for (std::size_t i = 0; i < units.size(); ++i) {
    out += units[i].text;
    if (i + 1 < units.size()) out += separators[next_sep++];
  }
  if (with_edges) out += separators[next_sep];
  return out;
}

/// Separator placed between units when the pipeline assembles generated text.
inline std::string_view unit_joiner(DomainKind kind) {
  return kind == DomainKind::code ? "\n\n" : " ";
}

}  // namespace featuremark
