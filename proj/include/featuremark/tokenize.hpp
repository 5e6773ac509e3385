// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

namespace featuremark {

namespace utf8 {

struct Decoded {
  char32_t code_point;
  std::size_t length;  // bytes consumed, >= 1
};

/// Decodes one code point at `pos`. Malformed sequences decode as U+FFFD and
/// consume a single byte so that scanning always makes progress.
inline Decoded decode(std::string_view s, std::size_t pos) noexcept {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  auto cont = [&](std::size_t i) -> int {
    if (pos + i >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[pos + i]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) return {b0, 1};
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0 && b0 >= 0xC2) return {static_cast<char32_t>(((b0 & 0x1F) << 6) | c1), 2};
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      const char32_t cp = ((b0 & 0x0F) << 12) | (c1 << 6) | c2;
      if (cp >= 0x800) return {cp, 3};
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      const char32_t cp = ((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3;
      if (cp >= 0x10000 && cp <= 0x10FFFF) return {cp, 4};
    }
  }
  return {0xFFFD, 1};
}

}  // namespace utf8

inline bool is_space(char32_t cp) noexcept {
  return cp == ' ' || cp == '\t' || cp == '\n' || cp == '\r' || cp == '\v' || cp == '\f' ||
         cp == 0x3000;
}

/// Scripts written without inter-word spaces: each character is a token.
inline bool is_cjk(char32_t cp) noexcept {
  return (cp >= 0x3001 && cp <= 0x303F) ||  // CJK symbols and punctuation
         (cp >= 0x3040 && cp <= 0x30FF) ||  // kana
         (cp >= 0x3400 && cp <= 0x4DBF) || (cp >= 0x4E00 && cp <= 0x9FFF) ||
         (cp >= 0xAC00 && cp <= 0xD7AF) ||  // hangul syllables
         (cp >= 0xF900 && cp <= 0xFAFF) ||  // compatibility ideographs
         (cp >= 0xFF00 && cp <= 0xFFEF) ||  // fullwidth forms
         (cp >= 0x20000 && cp <= 0x2FA1F);
}

struct Token {
  std::size_t byte_start;
  std::size_t byte_end;
  std::string_view text;
};

/// Whitespace-delimited words, with every CJK character split out as its own
/// token. Views point into `text`.
inline std::vector<Token> tokenize(std::string_view text) {
  std::vector<Token> out;
  std::size_t pos = 0;
  std::size_t word_start = std::string_view::npos;
  auto flush = [&](std::size_t end) {
    if (word_start != std::string_view::npos && end > word_start) {
      out.push_back({word_start, end, text.substr(word_start, end - word_start)});
    }
    word_start = std::string_view::npos;
  };
  while (pos < text.size()) {
    const auto [cp, len] = utf8::decode(text, pos);
    if (is_space(cp)) {
      flush(pos);
    } else if (is_cjk(cp)) {
      flush(pos);
      out.push_back({pos, pos + len, text.substr(pos, len)});
    } else if (word_start == std::string_view::npos) {
      word_start = pos;
    }
    pos += len;
  }
  flush(pos);
  return out;
}

inline std::size_t count_tokens(std::string_view text) { return tokenize(text).size(); }

}  // namespace featuremark
