#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "semsplit/errors.hpp"
#include "semsplit/text.hpp"

using namespace semsplit;

TEST_CASE("normalize_text lowercases, trims, and collapses whitespace") {
  CHECK(normalize_text("  Hello   WORLD ") == "hello world");
  CHECK(normalize_text("HIV") == "hiv");
  CHECK(normalize_text("a\tb\nc") == "a b c");
  CHECK(normalize_text("") == "");
  CHECK(normalize_text("   ") == "");
}

TEST_CASE("normalize_text applies NFC composition") {
  // "e" + COMBINING ACUTE ACCENT composes to the single code point.
  std::string decomposed = "cafe\xcc\x81";   // cafe + U+0301
  std::string composed = "caf\xc3\xa9";      // café, U+00E9
  CHECK(normalize_text(decomposed) == composed);
  CHECK(normalize_text("CAF\xc3\x89") == composed);  // CAFÉ
}

TEST_CASE("normalize_text rejects malformed UTF-8") {
  CHECK_THROWS_AS(normalize_text("\xff\xfe broken"), Error);
  try {
    normalize_text("\xc3");  // truncated sequence
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::invalid_encoding);
  }
}

TEST_CASE("normalize_words splits on non-alphanumerics") {
  auto words = normalize_words("HIV-positive, tested 2021!");
  REQUIRE(words.size() == 4);
  CHECK(words[0] == "hiv");
  CHECK(words[1] == "positive");
  CHECK(words[2] == "tested");
  CHECK(words[3] == "2021");
}

TEST_CASE("extract_terms covers words and punctuation losslessly") {
  TokenizerConfig config;
  TermSequence seq = extract_terms("HIV is a virus.", config);
  REQUIRE(seq.tokens.size() == 5);
  CHECK(seq.tokens[0].surface == "HIV");
  CHECK(seq.tokens[0].normalized == "hiv");
  CHECK(seq.tokens[0].is_content);
  CHECK(seq.tokens[3].surface == "virus");
  CHECK(seq.tokens[4].surface == ".");
  CHECK_FALSE(seq.tokens[4].is_content);

  // The original text is the tokens plus whitespace gaps.
  std::string rebuilt;
  size_t pos = 0;
  for (const Token& t : seq.tokens) {
    rebuilt += seq.original.substr(pos, t.begin - pos);
    rebuilt += t.surface;
    pos = t.end;
  }
  rebuilt += seq.original.substr(pos);
  CHECK(rebuilt == "HIV is a virus.");
}

TEST_CASE("stopwords are flagged non-content but keep their bytes") {
  TokenizerConfig config;
  config.stopwords = {"is", "a"};
  TermSequence seq = extract_terms("HIV is a virus", config);
  REQUIRE(seq.tokens.size() == 4);
  CHECK(seq.tokens[1].surface == "is");
  CHECK_FALSE(seq.tokens[1].is_content);
  CHECK(seq.tokens[1].normalized.empty());
  CHECK(seq.content_token_count() == 2);
  auto distinct = seq.distinct_content_terms();
  REQUIRE(distinct.size() == 2);
  CHECK(distinct[0] == "hiv");
  CHECK(distinct[1] == "virus");
}

TEST_CASE("phrases merge into single content tokens") {
  TokenizerConfig config;
  config.phrases = {"breast cancer"};
  TermSequence seq = extract_terms("Breast  Cancer found", config);
  REQUIRE(seq.tokens.size() == 2);
  CHECK(seq.tokens[0].surface == "Breast  Cancer");
  CHECK(seq.tokens[0].normalized == "breast cancer");
  CHECK(seq.tokens[1].normalized == "found");
  CHECK(seq.occurrences_of("breast cancer").size() == 1);
  // Constituent words are not double-counted.
  CHECK(seq.occurrences_of("breast").empty());
  CHECK(seq.occurrences_of("cancer").empty());
}

TEST_CASE("longer phrases win over shorter ones") {
  TokenizerConfig config;
  config.phrases = {"new york", "new york city"};
  TermSequence seq = extract_terms("moved to New York City today", config);
  auto distinct = seq.distinct_content_terms();
  CHECK(std::find(distinct.begin(), distinct.end(), "new york city") !=
        distinct.end());
  CHECK(std::find(distinct.begin(), distinct.end(), "new york") ==
        distinct.end());
}

TEST_CASE("phrase matching does not cross punctuation") {
  TokenizerConfig config;
  config.phrases = {"breast cancer"};
  TermSequence seq = extract_terms("breast, cancer", config);
  auto distinct = seq.distinct_content_terms();
  REQUIRE(distinct.size() == 2);
  CHECK(distinct[0] == "breast");
  CHECK(distinct[1] == "cancer");
}

TEST_CASE("empty document yields no tokens") {
  TokenizerConfig config;
  TermSequence seq = extract_terms("", config);
  CHECK(seq.tokens.empty());
  CHECK(seq.content_token_count() == 0);
}

TEST_CASE("occurrences_of returns every occurrence in order") {
  TokenizerConfig config;
  TermSequence seq = extract_terms("flu shot, flu season, FLU", config);
  auto occ = seq.occurrences_of("flu");
  REQUIRE(occ.size() == 3);
  CHECK(seq.tokens[occ[0]].surface == "flu");
  CHECK(seq.tokens[occ[2]].surface == "FLU");
}
