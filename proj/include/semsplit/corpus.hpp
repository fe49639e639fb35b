#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "semsplit/text.hpp"

namespace semsplit {

// Document-frequency index over the background corpus. Immutable once
// built; all probability queries run against it.
class CorpusIndex {
 public:
  static constexpr const char* kMagic = "SEMSPLIT-IDX-1";

  // `corpus` holds raw document texts. Multiword phrases are indexed as
  // single terms where they occur contiguously.
  static CorpusIndex build(const std::vector<std::string>& corpus,
                           const TokenizerConfig& tokenizer);

  uint64_t total_docs() const { return total_docs_; }
  // Documents containing the term (0 if unseen).
  uint64_t doc_count(const std::string& term) const;
  // Documents containing every term; terms must be normalized.
  uint64_t joint_doc_count(const std::vector<std::string>& terms) const;
  const std::vector<uint32_t>* postings(const std::string& term) const;
  size_t vocabulary_size() const { return postings_.size(); }
  std::vector<std::string> vocabulary() const;
  // Multiword phrases the index was built with; documents must be
  // tokenized with the same set for counts to line up.
  const std::set<std::string>& phrases() const { return phrase_vocab_; }

  void save(const std::string& path) const;
  static CorpusIndex load(const std::string& path);

 private:
  uint64_t total_docs_ = 0;
  // term -> sorted doc ids
  std::map<std::string, std::vector<uint32_t>> postings_;
  std::set<std::string> phrase_vocab_;
};

enum class CorpusMode { directory, lines };

const char* corpus_mode_name(CorpusMode mode);
CorpusMode corpus_mode_from_name(const std::string& name);

// directory mode: one document per regular file (lexicographic order);
// lines mode: one document per line of a single file.
std::vector<std::string> read_corpus(const std::string& path, CorpusMode mode);

}  // namespace semsplit
