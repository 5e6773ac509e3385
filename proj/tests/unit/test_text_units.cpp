// Copyright 2026 The featuremark Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <string>
#include <vector>

#include "featuremark/random.hpp"
#include "featuremark/text_units.hpp"

namespace fm = featuremark;

namespace {

std::vector<std::string> texts(const std::vector<fm::Unit>& units) {
  std::vector<std::string> out;
  for (const auto& u : units) out.push_back(u.text);
  return out;
}

// Random document over a mixed alphabet: ASCII words, CJK characters,
// terminators of both widths, abbreviations, quotes and irregular whitespace.
std::string random_document(std::uint64_t seed) {
  static const std::vector<std::string> kPieces = {
      "alpha", "Beta", "gamma", "delta", "x", "Mr.", "e.g.", "J.", "3.14", "U.S.",
      "你", "好", "世", "界", "こ", "ん", "한", "국", "Ärger", "naïve", "Ωmega", "\"quoted\"",
      "(paren)", "well...", "why?!", "done.", "stop!", "ask?", "。", "！", "？", "end.\"",
  };
  static const std::vector<std::string> kGaps = {" ", " ", " ", "  ", "\n", "\t", "\r\n",
                                                 "\u3000", "", " \n\n "};
  fm::CounterStream rng(seed);
  std::string doc;
  if (fm::uniform_below(rng, 4) == 0) doc += kGaps[fm::uniform_below(rng, kGaps.size())];
  const std::size_t n = 1 + fm::uniform_below(rng, 40);
  for (std::size_t i = 0; i < n; ++i) {
    doc += kPieces[fm::uniform_below(rng, kPieces.size())];
    if (i + 1 < n || fm::uniform_below(rng, 3) == 0) {
      doc += kGaps[fm::uniform_below(rng, kGaps.size())];
    }
  }
  if (doc.find_first_not_of(" \t\r\n") == std::string::npos) doc += "fallback";
  return doc;
}

}  // namespace

TEST(SegmentText, TwoSentences) {
  const auto units = fm::segment_text("Hello. World.", fm::DomainKind::natural_language);
  EXPECT_EQ(texts(units), (std::vector<std::string>{"Hello.", "World."}));
  EXPECT_EQ(units[0].byte_start, 0u);
  EXPECT_EQ(units[0].byte_end, 6u);
  EXPECT_EQ(units[1].byte_start, 7u);
  EXPECT_EQ(units[1].kind, fm::UnitKind::sentence);
}

TEST(SegmentText, CjkTerminators) {
  const auto units = fm::segment_text("你好。再见。", fm::DomainKind::natural_language);
  EXPECT_EQ(texts(units), (std::vector<std::string>{"你好。", "再见。"}));
}

TEST(SegmentText, WhitespaceOnlyIsEmptyInput) {
  for (const char* s : {"", "   ", "\n\t "}) {
    try {
      fm::segment_text(s, fm::DomainKind::natural_language);
      FAIL() << "expected EmptyInput for '" << s << "'";
    } catch (const fm::Error& e) {
      EXPECT_EQ(e.code(), fm::Errc::empty_input);
    }
  }
}

TEST(SegmentText, AbbreviationsDoNotBreak) {
  const auto units = fm::segment_text("Mr. Smith met Dr. J. Watson, e.g. at noon. He left.",
                                      fm::DomainKind::natural_language);
  EXPECT_EQ(texts(units), (std::vector<std::string>{"Mr. Smith met Dr. J. Watson, e.g. at noon.",
                                                    "He left."}));
}

TEST(SegmentText, TerminatorRunsAndQuotes) {
  const auto units =
      fm::segment_text("Really?! \"Yes.\" Then... fine", fm::DomainKind::natural_language);
  EXPECT_EQ(texts(units), (std::vector<std::string>{"Really?!", "\"Yes.\"", "Then...", "fine"}));
}

TEST(SegmentText, DecimalPointIsNotABreak) {
  const auto units = fm::segment_text("Pi is 3.14 today. Ok.", fm::DomainKind::natural_language);
  EXPECT_EQ(units.size(), 2u);
}

TEST(SegmentText, ThreeFunctionSourceFile) {
  const std::string src =
      "def first(a):\n"
      "    return a + 1\n"
      "\n"
      "def second(b):\n"
      "    if b:\n"
      "        return 2\n"
      "    return 3\n"
      "\n"
      "\n"
      "def third():\n"
      "    pass\n";
  const auto units = fm::segment_text(src, fm::DomainKind::code);
  ASSERT_EQ(units.size(), 3u);
  EXPECT_EQ(units[0].text, "def first(a):\n    return a + 1");
  EXPECT_TRUE(units[1].text.starts_with("def second(b):"));
  EXPECT_TRUE(units[1].text.ends_with("return 3"));
  EXPECT_EQ(units[2].text, "def third():\n    pass");
  EXPECT_EQ(units[2].kind, fm::UnitKind::code_block);
}

TEST(SegmentText, CodeBracesStayInBlock) {
  const std::string src =
      "int f() {\n  return 1;\n}\n\nint g() {\n  if (x) {\n    y();\n  }\n  else {\n  }\n}\n";
  const auto units = fm::segment_text(src, fm::DomainKind::code);
  ASSERT_EQ(units.size(), 2u);
  EXPECT_EQ(units[0].text, "int f() {\n  return 1;\n}");
}

TEST(SegmentText, ShortUnitsMergeForward) {
  const std::string s = "Hi. This is long enough. Ok.";
  const auto raw = fm::segment_text(s, fm::DomainKind::natural_language);
  EXPECT_EQ(raw.size(), 3u);
  const auto merged = fm::segment_text(s, fm::DomainKind::natural_language, fm::kPipelineSegmentation);
  // "Hi." joins the next unit; trailing "Ok." joins the previous one.
  EXPECT_EQ(texts(merged), (std::vector<std::string>{"Hi. This is long enough. Ok."}));
}

TEST(SegmentText, ShortOnlyDocumentIsOneUnit) {
  const auto units =
      fm::segment_text("A. B.", fm::DomainKind::natural_language, fm::kPipelineSegmentation);
  EXPECT_EQ(texts(units), (std::vector<std::string>{"A. B."}));
}

TEST(Reassemble, RoundtripWithEdges) {
  const std::string s = "  Hello there.\n\nWorld is big!  ";
  const auto units = fm::segment_text(s, fm::DomainKind::natural_language);
  const auto seps = fm::separators_of(s, units);
  ASSERT_EQ(seps.size(), units.size() + 1);
  EXPECT_EQ(fm::reassemble(units, seps), s);
}

TEST(Reassemble, InnerSeparatorsOnly) {
  const auto units = fm::segment_text("One two. Three four.", fm::DomainKind::natural_language);
  const std::vector<std::string> seps = {" | "};
  EXPECT_EQ(fm::reassemble(units, seps), "One two. | Three four.");
}

TEST(Reassemble, Errors) {
  const std::vector<fm::Unit> none;
  const std::vector<std::string> seps;
  try {
    fm::reassemble(none, seps);
    FAIL();
  } catch (const fm::Error& e) {
    EXPECT_EQ(e.code(), fm::Errc::empty_input);
  }
  const auto units = fm::segment_text("A b c. D e f. G h i.", fm::DomainKind::natural_language);
  const std::vector<std::string> wrong = {" "};
  try {
    fm::reassemble(units, wrong);
    FAIL();
  } catch (const fm::Error& e) {
    EXPECT_EQ(e.code(), fm::Errc::length_mismatch);
  }
}

TEST(SegmentProperties, ThousandMultilingualRoundtrips) {
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const std::string doc = random_document(seed);
    for (std::size_t min_tokens : {std::size_t{1}, fm::kPipelineMinUnitTokens}) {
      const auto units = fm::segment_text(doc, fm::DomainKind::natural_language, {min_tokens});
      ASSERT_FALSE(units.empty());
      for (std::size_t i = 0; i < units.size(); ++i) {
        ASSERT_LT(units[i].byte_start, units[i].byte_end);
        ASSERT_EQ(units[i].text, doc.substr(units[i].byte_start, units[i].byte_end - units[i].byte_start));
        if (i > 0) ASSERT_LE(units[i - 1].byte_end, units[i].byte_start);
      }
      ASSERT_EQ(fm::reassemble(units, fm::separators_of(doc, units)), doc) << "seed " << seed;
    }
  }
}

TEST(SegmentProperties, Idempotence) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const std::string doc = random_document(seed);
    for (const auto& u : fm::segment_text(doc, fm::DomainKind::natural_language)) {
      const auto again = fm::segment_text(u.text, fm::DomainKind::natural_language);
      ASSERT_EQ(again.size(), 1u) << "seed " << seed << " unit '" << u.text << "'";
      EXPECT_EQ(again[0].text, u.text);
    }
  }
}

TEST(SegmentProperties, PrefixStability) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const std::string doc = random_document(seed);
    const auto full = fm::segment_text(doc, fm::DomainKind::natural_language);
    for (std::size_t cut = 1; cut < doc.size(); cut += 3) {
      // Prefixes end on a code point boundary.
      while (cut < doc.size() && (static_cast<unsigned char>(doc[cut]) & 0xC0) == 0x80) ++cut;
      if (cut >= doc.size()) break;
      const std::string prefix = doc.substr(0, cut);
      if (prefix.find_first_not_of(" \t\r\n") == std::string::npos) continue;
      const auto part = fm::segment_text(prefix, fm::DomainKind::natural_language);
      ASSERT_LE(part.size(), full.size());
      for (std::size_t i = 0; i + 1 < part.size(); ++i) {
        ASSERT_EQ(part[i], full[i]) << "seed " << seed << " cut " << cut;
      }
    }
  }
}

TEST(UnitJoiner, ByDomain) {
  EXPECT_EQ(fm::unit_joiner(fm::DomainKind::natural_language), " ");
  EXPECT_EQ(fm::unit_joiner(fm::DomainKind::code), "\n\n");
}
