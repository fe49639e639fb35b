#pragma once

#include <cstddef>
#include <set>
#include <string>
#include <vector>

namespace semsplit {

// Canonical form used for all term comparisons and corpus lookups:
// NFC, lowercased (root locale), runs of whitespace collapsed to a single
// space, leading/trailing whitespace removed. Throws InvalidEncoding on
// malformed UTF-8.
std::string normalize_text(const std::string& utf8);

// Splits a UTF-8 string into normalized words (letter/digit runs).
std::vector<std::string> normalize_words(const std::string& utf8);

// True when needle appears as a contiguous run inside haystack. An empty
// needle matches nothing.
bool word_sequence_contains(const std::vector<std::string>& haystack,
                            const std::vector<std::string>& needle);

struct Token {
  std::string surface;     // exact original bytes
  std::string normalized;  // empty iff !is_content
  size_t begin = 0;        // byte span [begin, end)
  size_t end = 0;
  bool is_content = false;
};

// A tokenized document. Byte spans are disjoint and ordered; the original
// text is recoverable from `original` alone, and `tokens` cover every
// word and punctuation run in it (whitespace lives in the gaps).
struct TermSequence {
  std::string doc_id;
  std::string original;
  std::vector<Token> tokens;

  // Distinct normalized content terms, sorted.
  std::vector<std::string> distinct_content_terms() const;
  // Indices into `tokens` of content tokens whose normalized form matches.
  std::vector<size_t> occurrences_of(const std::string& normalized) const;
  size_t content_token_count() const;
};

struct TokenizerConfig {
  std::set<std::string> stopwords;  // normalized forms
  std::vector<std::string> phrases;  // normalized multiword phrases
};

// Lossless tokenization: word tokens, punctuation tokens, phrase merging,
// stopword flagging. Rejects invalid UTF-8.
TermSequence extract_terms(const std::string& raw_document,
                           const TokenizerConfig& config);

// Loads one entry per line, UTF-8, '#' comments and blank lines skipped;
// entries are normalized on load.
std::vector<std::string> load_term_list_file(const std::string& path);

}  // namespace semsplit
