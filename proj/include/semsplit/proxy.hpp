#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <utility>
#include <vector>

#include "semsplit/corpus.hpp"
#include "semsplit/detection.hpp"
#include "semsplit/knowledge.hpp"
#include "semsplit/policy.hpp"
#include "semsplit/splitting.hpp"
#include "semsplit/storage.hpp"
#include "semsplit/text.hpp"

namespace semsplit {

inline constexpr const char* kMetadataSchema = "semsplit-meta-1";

// Where one removed quasi-identifier occurrence lives in the cloud.
struct ClocRef {
  std::string location_id;
  std::string handle;
  std::size_t offset = 0;

  bool operator==(const ClocRef&) const = default;
};

// The local splitting criterion for one outsourced document. The k-th
// identifier sentinel in the sanitized document resolves to
// sort_list_ids[k]; the k-th quasi-identifier sentinel to the entry at
// sort_list_cloc[k].
struct DocMetadata {
  std::string doc_id;
  std::string user_id;
  std::vector<std::string> sort_list_ids;  // surfaces, reading order
  std::vector<ClocRef> sort_list_cloc;     // reading order
  std::pair<std::string, std::string> doc_cloc;  // (location_id, handle)
  std::string policy_fingerprint;
};

struct QueryResult {
  std::map<std::string, bool> matches;  // doc_id -> matched

  std::vector<std::string> matching_docs() const;
};

struct OutsourceReceipt {
  std::string doc_id;
  std::size_t identifier_occurrences = 0;
  std::size_t qid_occurrences = 0;
  std::size_t content_terms = 0;
  std::set<std::uint64_t> chunks_touched;
};

struct ProxyOptions {
  Strategy strategy = Strategy::greedy_heuristic;
  DetectionConfig detection;
  SentinelConfig sentinels;
  double epsilon = kDefaultEpsilonBits;
  std::string user_id = "user-0";
};

struct LocationStatus {
  std::string location_id;
  std::size_t item_count = 0;
};

struct ChunkStatus {
  std::uint64_t chunk_id = 0;
  std::string location_id;
  std::size_t live_entries = 0;
  std::size_t tombstones = 0;
  double disclosure_score = 0.0;
};

struct StatusReport {
  std::size_t document_count = 0;
  std::vector<LocationStatus> locations;
  std::vector<ChunkStatus> chunks;
};

// The trusted client-side orchestrator: documents go in whole, leave as a
// sanitized remainder plus per-location chunks, and come back byte-exact.
// Mutations (outsource, updates, load) are serialized; retrieval and
// search run concurrently against a consistent snapshot.
class Proxy {
 public:
  Proxy(const CorpusIndex& index, PrivacyPolicy policy,
        TokenizerConfig tokenizer, LocationPool& pool,
        ProxyOptions options = {});

  // Detects risky terms, splits, stores chunks and the sanitized document,
  // and records metadata. Empty doc_id auto-assigns one. Partial storage
  // failures roll back already-stored items for this document.
  OutsourceReceipt outsource(std::string doc_id,
                             const std::string& raw_document);

  // Byte-exact reconstruction; fetches fan out one request per distinct
  // location.
  std::string retrieve(const std::string& doc_id) const;

  // Normalized-token match over local identifier lists, cloud chunks, and
  // sanitized remainders. Empty scope means every outsourced document.
  QueryResult keyword_search(const std::string& keyword,
                             const std::set<std::string>& scope = {}) const;
  // Boolean combination of keywords: NOT binds tighter than AND, AND
  // tighter than OR; parentheses group; double-quoted phrases are single
  // keywords.
  QueryResult boolean_search(const std::string& expr,
                             const std::set<std::string>& scope = {}) const;

  // Surgical edits. `position` indexes the document's content terms in
  // reading order (stopwords and punctuation are not addressable).
  void delete_term(const std::string& doc_id, std::size_t position);
  void replace_term(const std::string& doc_id, std::size_t position,
                    const std::string& new_text);
  // Inserts before content term `position`; position == content term count
  // appends at the end of the document.
  void insert_term(const std::string& doc_id, std::size_t position,
                   const std::string& new_text);

  void persist_metadata(const std::filesystem::path& store_path) const;
  // Replaces in-memory metadata and rebuilds the chunk pool from the
  // stored payloads the records reference.
  void load_metadata(const std::filesystem::path& store_path);

  StatusReport status() const;

  const std::map<std::string, DocMetadata>& documents() const {
    return metadata_;
  }
  const ChunkSet& chunks() const { return chunks_; }
  const KnowledgeOracle& oracle() const { return oracle_; }
  const PrivacyPolicy& policy() const { return policy_; }
  const ProxyOptions& options() const { return options_; }
  const TokenizerConfig& tokenizer() const { return tokenizer_; }
  LocationPool& pool() { return pool_; }
  const LocationPool& pool() const { return pool_; }

 private:
  struct RiskySpan {
    bool is_qid = false;
    std::size_t ordinal = 0;  // index within its kind's sort list
    std::size_t orig_begin = 0;
    std::size_t orig_end = 0;
    std::size_t dprime_begin = 0;
    std::size_t dprime_end = 0;
  };

  struct Reconstruction {
    std::string dprime;
    std::string original;
    std::vector<RiskySpan> spans;  // reading order
  };

  enum class TermClass { identifier, quasi, plain };

  const DocMetadata& require_doc(const std::string& doc_id) const;
  std::map<std::pair<std::string, std::string>, std::string> fetch_items(
      const std::set<std::pair<std::string, std::string>>& refs) const;
  Reconstruction reconstruct(const DocMetadata& meta) const;
  std::size_t orig_to_dprime(const Reconstruction& rec, std::size_t pos) const;
  TermClass classify_new_term(const std::string& normalized,
                              const std::set<std::string>& visible) const;
  // Fills in every (keyword, doc) cell for the docs in scope, querying
  // each location once per keyword.
  void evaluate_keywords(
      std::map<std::string, std::map<std::string, bool>>& keyword_matches,
      const std::set<std::string>& docs) const;
  Chunk* find_chunk_by_ref(ChunkSet& chunks, const ClocRef& ref) const;
  std::set<std::string> locations_used_by(const DocMetadata& meta,
                                          const ChunkSet& chunks) const;
  void rebuild_chunks();
  void assert_chunks_safe(const ChunkSet& chunks,
                          const std::set<std::uint64_t>& ids) const;

  const CorpusIndex& index_;
  PrivacyPolicy policy_;
  TokenizerConfig tokenizer_;
  LocationPool& pool_;
  ProxyOptions options_;
  KnowledgeOracle oracle_;
  ChunkSet chunks_;
  std::map<std::string, DocMetadata> metadata_;
  std::uint64_t next_doc_number_ = 1;
  mutable std::shared_mutex mutex_;
};

}  // namespace semsplit
