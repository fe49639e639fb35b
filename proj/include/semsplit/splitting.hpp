#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "semsplit/detection.hpp"
#include "semsplit/knowledge.hpp"
#include "semsplit/policy.hpp"
#include "semsplit/text.hpp"

namespace semsplit {

enum class Strategy { naive, greedy_plain, greedy_heuristic };

const char* strategy_name(Strategy s);
Strategy strategy_from_name(const std::string& name);

// One replaced occurrence.  Tombstoned entries keep their position so that
// offsets recorded in metadata stay valid after deletions.
struct ChunkEntry {
  std::string surface;     // exact original bytes
  std::string normalized;  // empty iff tombstone
  std::string doc_id;
  std::size_t sentinel_index = 0;  // reading-order ordinal within the doc
  bool tombstone = false;
};

struct Chunk {
  std::uint64_t chunk_id = 0;
  std::vector<ChunkEntry> entries;  // insertion order; positions stable
  double disclosure_score = 0.0;
  // Set once the chunk is placed at a storage location.
  std::optional<std::string> location_id;
  // Storage handle of the chunk's payload, once stored.
  std::optional<std::string> handle;

  // Distinct normalized terms of live entries, sorted.
  std::vector<std::string> term_set() const;
  bool contains_term(const std::string& normalized) const;
};

// Shared mutable pool of chunks.  Allocations for different documents must
// be serialized by the caller; chunks are stable in memory once created.
class ChunkSet {
 public:
  Chunk& create_chunk();
  Chunk* find(std::uint64_t chunk_id);
  const Chunk* find(std::uint64_t chunk_id) const;

  std::size_t size() const { return chunks_.size(); }
  bool empty() const { return chunks_.empty(); }
  std::deque<Chunk>& chunks() { return chunks_; }
  const std::deque<Chunk>& chunks() const { return chunks_; }

  // Continue numbering after reloading persisted chunks.
  void adopt(Chunk chunk);

 private:
  std::deque<Chunk> chunks_;
  std::uint64_t next_id_ = 1;
};

struct QidAssignment {
  std::size_t sentinel_index = 0;       // reading-order ordinal in the doc
  std::uint64_t chunk_id = 0;
  std::size_t offset_within_chunk = 0;  // entry position inside the chunk
};

struct SplitPlan {
  std::string doc_id;
  std::string sanitized_text;  // document with sentinels in place
  // (sentinel_index, surface) per identifier occurrence, reading order.
  std::vector<std::pair<std::size_t, std::string>> identifier_list;
  std::vector<QidAssignment> qid_assignments;  // reading order
  std::set<std::uint64_t> chunks_touched;
};

struct SentinelConfig {
  std::string id = "\xe2\x9f\xa6"
                   "ID\xe2\x9f\xa7";  // ⟦ID⟧
  std::string qid = "\xe2\x9f\xa6"
                    "QID\xe2\x9f\xa7";  // ⟦QID⟧
};

// Highest co-occurrence pressure any policy entity suffers from the chunk,
// as a fraction of its threshold: max over entities of PMI / threshold,
// never below 0.  Empty chunks and no-correlation entities contribute 0.
double chunk_disclosure_score(const std::vector<std::string>& chunk_terms,
                              const PrivacyPolicy& policy,
                              const KnowledgeOracle& oracle);

// True iff the chunk could absorb `candidate` without any policy entity's
// threshold being reached.
bool merge_probe(const Chunk& chunk, const std::vector<std::string>& candidate,
                 const PrivacyPolicy& policy, const KnowledgeOracle& oracle);

// Replaces risky occurrences with sentinels and allocates quasi-identifying
// terms to chunks under the chosen strategy.  Touched chunks always satisfy
// the no-disclosure invariant afterwards; chunks already placed at a storage
// location are skipped when that location is already used by another chunk
// this document touches.
SplitPlan sanitize_and_plan(const TermSequence& doc,
                            const std::vector<RiskySet>& risky,
                            const PrivacyPolicy& policy,
                            const KnowledgeOracle& oracle, Strategy strategy,
                            ChunkSet& chunks,
                            const SentinelConfig& sentinels = {});

// Places a single new entry during a document edit: existing chunks are
// probed in ascending (disclosure_score, chunk_id) order, skipping any
// whose location is in avoid_locations, then a fresh chunk is tried.
// Returns the chosen chunk and the entry's offset in it.
std::pair<Chunk*, std::size_t> allocate_update_entry(
    ChunkEntry entry, const PrivacyPolicy& policy,
    const KnowledgeOracle& oracle, ChunkSet& chunks,
    const std::set<std::string>& avoid_locations);

}  // namespace semsplit
