#include "semsplit/text.hpp"

#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "semsplit/errors.hpp"

namespace semsplit {

namespace {

icu::UnicodeString decode_utf8(const std::string& utf8) {
  icu::UnicodeString s = icu::UnicodeString::fromUTF8(utf8);
  // fromUTF8 substitutes malformed sequences with U+FFFD; reject those
  // unless the input itself contained U+FFFD.
  if (s.indexOf(static_cast<UChar32>(0xFFFD)) >= 0 &&
      utf8.find("\xEF\xBF\xBD") == std::string::npos) {
    fail(ErrorCode::invalid_encoding, "input is not valid UTF-8");
  }
  return s;
}

std::string encode_utf8(const icu::UnicodeString& s) {
  std::string out;
  s.toUTF8String(out);
  return out;
}

const icu::Normalizer2& nfc() {
  UErrorCode status = U_ZERO_ERROR;
  const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
  if (U_FAILURE(status) || n == nullptr) {
    fail(ErrorCode::internal_error, "ICU NFC normalizer unavailable");
  }
  return *n;
}

bool is_word_char(UChar32 c) { return u_isalnum(c); }

}  // namespace

std::string normalize_text(const std::string& utf8) {
  icu::UnicodeString s = decode_utf8(utf8);
  UErrorCode status = U_ZERO_ERROR;
  icu::UnicodeString composed = nfc().normalize(s, status);
  if (U_FAILURE(status)) {
    fail(ErrorCode::invalid_encoding, "NFC normalization failed");
  }
  composed.toLower(icu::Locale::getRoot());

  icu::UnicodeString collapsed;
  bool pending_space = false;
  bool seen_any = false;
  for (int32_t i = 0; i < composed.length();) {
    UChar32 c = composed.char32At(i);
    i += U16_LENGTH(c);
    if (u_isUWhiteSpace(c)) {
      pending_space = seen_any;
      continue;
    }
    if (pending_space) {
      collapsed.append(static_cast<UChar32>(' '));
      pending_space = false;
    }
    collapsed.append(c);
    seen_any = true;
  }
  return encode_utf8(collapsed);
}

std::vector<std::string> normalize_words(const std::string& utf8) {
  icu::UnicodeString s = decode_utf8(utf8);
  std::vector<std::string> words;
  icu::UnicodeString current;
  auto flush = [&] {
    if (!current.isEmpty()) {
      words.push_back(normalize_text(encode_utf8(current)));
      current.remove();
    }
  };
  for (int32_t i = 0; i < s.length();) {
    UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    if (is_word_char(c)) {
      current.append(c);
    } else {
      flush();
    }
  }
  flush();
  return words;
}

bool word_sequence_contains(const std::vector<std::string>& haystack,
                            const std::vector<std::string>& needle) {
  if (needle.empty() || needle.size() > haystack.size()) return false;
  return std::search(haystack.begin(), haystack.end(), needle.begin(),
                     needle.end()) != haystack.end();
}

std::vector<std::string> TermSequence::distinct_content_terms() const {
  std::set<std::string> seen;
  for (const Token& t : tokens) {
    if (t.is_content) seen.insert(t.normalized);
  }
  return {seen.begin(), seen.end()};
}

std::vector<size_t> TermSequence::occurrences_of(
    const std::string& normalized) const {
  std::vector<size_t> out;
  for (size_t i = 0; i < tokens.size(); ++i) {
    if (tokens[i].is_content && tokens[i].normalized == normalized) {
      out.push_back(i);
    }
  }
  return out;
}

size_t TermSequence::content_token_count() const {
  size_t n = 0;
  for (const Token& t : tokens) {
    if (t.is_content) ++n;
  }
  return n;
}

namespace {

struct RawToken {
  size_t begin = 0;
  size_t end = 0;
  bool word = false;
  std::string normalized;  // words only
};

// Word tokens are maximal alphanumeric runs; punctuation runs (no
// whitespace) become non-word tokens; whitespace separates tokens.
std::vector<RawToken> scan_tokens(const std::string& raw) {
  icu::UnicodeString s = decode_utf8(raw);
  std::vector<RawToken> out;

  // Walk code points while tracking the byte offset in the source UTF-8
  // (ICU string indices are UTF-16 units, not bytes).
  size_t byte_pos = 0;
  RawToken current;
  enum class State { gap, word, punct } state = State::gap;

  auto close = [&](size_t end_byte) {
    if (state == State::gap) return;
    current.end = end_byte;
    if (current.word) {
      current.normalized = raw.substr(current.begin, current.end - current.begin);
    }
    out.push_back(current);
    state = State::gap;
  };

  for (int32_t i = 0; i < s.length();) {
    UChar32 c = s.char32At(i);
    i += U16_LENGTH(c);
    // Length of this code point in UTF-8.
    size_t cp_len = U8_LENGTH(c);

    State cls = u_isUWhiteSpace(c) ? State::gap
                : is_word_char(c)  ? State::word
                                   : State::punct;
    if (cls != state) {
      close(byte_pos);
      if (cls != State::gap) {
        current = RawToken{};
        current.begin = byte_pos;
        current.word = (cls == State::word);
        state = cls;
      }
    }
    byte_pos += cp_len;
  }
  close(byte_pos);

  for (RawToken& t : out) {
    if (t.word) t.normalized = normalize_text(t.normalized);
  }
  return out;
}

}  // namespace

TermSequence extract_terms(const std::string& raw_document,
                           const TokenizerConfig& config) {
  TermSequence seq;
  seq.original = raw_document;
  if (raw_document.empty()) return seq;

  std::vector<RawToken> raw = scan_tokens(raw_document);

  // Phrase table keyed by first word; longest phrase wins.
  std::map<std::string, std::vector<std::vector<std::string>>> phrase_index;
  for (const std::string& phrase : config.phrases) {
    std::istringstream in(phrase);
    std::vector<std::string> words;
    std::string w;
    while (in >> w) words.push_back(w);
    if (words.size() >= 2) phrase_index[words.front()].push_back(words);
  }
  for (auto& [first, list] : phrase_index) {
    std::sort(list.begin(), list.end(),
              [](const auto& a, const auto& b) { return a.size() > b.size(); });
  }

  size_t i = 0;
  while (i < raw.size()) {
    const RawToken& t = raw[i];
    if (!t.word) {
      seq.tokens.push_back(Token{
          raw_document.substr(t.begin, t.end - t.begin), "", t.begin, t.end,
          false});
      ++i;
      continue;
    }

    // Try to merge a phrase starting here over consecutive word tokens.
    size_t merged = 0;
    auto it = phrase_index.find(t.normalized);
    if (it != phrase_index.end()) {
      for (const auto& words : it->second) {
        bool match = true;
        size_t j = i;
        for (const std::string& w : words) {
          if (j >= raw.size() || !raw[j].word || raw[j].normalized != w) {
            match = false;
            break;
          }
          ++j;
        }
        if (match) {
          merged = words.size();
          break;
        }
      }
    }

    if (merged >= 2) {
      size_t begin = raw[i].begin;
      size_t end = raw[i + merged - 1].end;
      std::string surface = raw_document.substr(begin, end - begin);
      seq.tokens.push_back(
          Token{surface, normalize_text(surface), begin, end, true});
      i += merged;
      continue;
    }

    bool stop = config.stopwords.count(t.normalized) > 0;
    seq.tokens.push_back(Token{raw_document.substr(t.begin, t.end - t.begin),
                               stop ? "" : t.normalized, t.begin, t.end,
                               !stop});
    ++i;
  }
  return seq;
}

std::vector<std::string> load_term_list_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, "cannot open term list: " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::string norm = normalize_text(line);
    if (!norm.empty()) out.push_back(norm);
  }
  return out;
}

}  // namespace semsplit
