#include "semsplit/splitting.hpp"

#include <algorithm>
#include <map>

#include "semsplit/errors.hpp"

namespace semsplit {

const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::naive:
      return "naive";
    case Strategy::greedy_plain:
      return "plain";
    case Strategy::greedy_heuristic:
      return "heuristic";
  }
  return "unknown";
}

Strategy strategy_from_name(const std::string& name) {
  if (name == "naive") return Strategy::naive;
  if (name == "plain" || name == "greedy_plain") return Strategy::greedy_plain;
  if (name == "heuristic" || name == "greedy_heuristic") {
    return Strategy::greedy_heuristic;
  }
  fail(ErrorCode::config_error,
       "unknown strategy '" + name + "' (expected naive|plain|heuristic)");
}

std::vector<std::string> Chunk::term_set() const {
  std::vector<std::string> terms;
  for (const ChunkEntry& e : entries) {
    if (!e.tombstone) terms.push_back(e.normalized);
  }
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  return terms;
}

bool Chunk::contains_term(const std::string& normalized) const {
  for (const ChunkEntry& e : entries) {
    if (!e.tombstone && e.normalized == normalized) return true;
  }
  return false;
}

Chunk& ChunkSet::create_chunk() {
  Chunk& chunk = chunks_.emplace_back();
  chunk.chunk_id = next_id_++;
  return chunk;
}

Chunk* ChunkSet::find(std::uint64_t chunk_id) {
  for (Chunk& c : chunks_) {
    if (c.chunk_id == chunk_id) return &c;
  }
  return nullptr;
}

const Chunk* ChunkSet::find(std::uint64_t chunk_id) const {
  for (const Chunk& c : chunks_) {
    if (c.chunk_id == chunk_id) return &c;
  }
  return nullptr;
}

void ChunkSet::adopt(Chunk chunk) {
  next_id_ = std::max(next_id_, chunk.chunk_id + 1);
  chunks_.push_back(std::move(chunk));
}

double chunk_disclosure_score(const std::vector<std::string>& chunk_terms,
                              const PrivacyPolicy& policy,
                              const KnowledgeOracle& oracle) {
  if (chunk_terms.empty()) return 0.0;
  double best = 0.0;
  for (const PolicyEntry& entry : policy.entries) {
    double threshold = oracle.entity_threshold(entry);
    double value = oracle.pmi(entry, chunk_terms);
    if (value == kNoCorrelation) continue;  // no corpus link, contributes 0
    best = std::max(best, value / threshold);
  }
  return best;
}

bool merge_probe(const Chunk& chunk, const std::vector<std::string>& candidate,
                 const PrivacyPolicy& policy, const KnowledgeOracle& oracle) {
  std::vector<std::string> merged = chunk.term_set();
  merged.insert(merged.end(), candidate.begin(), candidate.end());
  std::sort(merged.begin(), merged.end());
  merged.erase(std::unique(merged.begin(), merged.end()), merged.end());
  return !oracle.check_disclosure(policy, merged).disclosing;
}

namespace {

// Mutable state threaded through one document's allocation pass.
struct Allocation {
  const TermSequence& doc;
  const PrivacyPolicy& policy;
  const KnowledgeOracle& oracle;
  Strategy strategy;
  ChunkSet& chunks;
  const std::map<std::size_t, std::size_t>& sentinel_of;  // token -> ordinal
  SplitPlan& plan;

  // Chunks eligible for probing, in the strategy's order.  A chunk whose
  // storage location is already used by a different chunk this document
  // touches must be skipped (one chunk per location per document).
  std::vector<Chunk*> probe_order() {
    std::vector<Chunk*> order;
    if (strategy == Strategy::naive) return order;
    for (Chunk& c : chunks.chunks()) order.push_back(&c);
    if (strategy == Strategy::greedy_heuristic) {
      std::sort(order.begin(), order.end(), [](const Chunk* a, const Chunk* b) {
        if (a->disclosure_score != b->disclosure_score) {
          return a->disclosure_score < b->disclosure_score;
        }
        return a->chunk_id < b->chunk_id;
      });
    }
    return order;
  }

  bool location_conflict(const Chunk& candidate) const {
    if (!candidate.location_id.has_value()) return false;
    for (std::uint64_t id : plan.chunks_touched) {
      if (id == candidate.chunk_id) continue;
      const Chunk* touched = chunks.find(id);
      if (touched != nullptr && touched->location_id.has_value() &&
          *touched->location_id == *candidate.location_id) {
        return true;
      }
    }
    return false;
  }

  // Appends one entry per occurrence of `term` and records the sentinel ->
  // chunk assignments.
  void commit(Chunk& chunk, const std::string& term) {
    for (std::size_t tok : doc.occurrences_of(term)) {
      ChunkEntry entry;
      entry.surface = doc.tokens[tok].surface;
      entry.normalized = term;
      entry.doc_id = doc.doc_id;
      entry.sentinel_index = sentinel_of.at(tok);
      std::size_t offset = chunk.entries.size();
      chunk.entries.push_back(std::move(entry));
      plan.qid_assignments.push_back(
          {sentinel_of.at(tok), chunk.chunk_id, offset});
    }
    plan.chunks_touched.insert(chunk.chunk_id);
    chunk.disclosure_score =
        chunk_disclosure_score(chunk.term_set(), policy, oracle);
  }

  // Verifies a block is admissible in a fresh chunk without creating one.
  bool fresh_admits(const std::vector<std::string>& block) const {
    Chunk empty;
    return merge_probe(empty, block, policy, oracle);
  }

  void commit_block(Chunk& chunk, const std::vector<std::string>& block) {
    for (const std::string& term : block) commit(chunk, term);
  }

  // Probe-or-create for a single term.
  void allocate_term(const std::string& term) {
    for (Chunk* c : probe_order()) {
      if (location_conflict(*c)) continue;
      if (merge_probe(*c, {term}, policy, oracle)) {
        commit(*c, term);
        return;
      }
    }
    if (!fresh_admits({term})) {
      fail(ErrorCode::allocation_impossible,
           "term '" + term +
               "' was classified quasi-identifying but cannot sit alone in "
               "an empty chunk");
    }
    commit(chunks.create_chunk(), term);
  }

  void allocate_fresh(const std::string& term) {
    if (!fresh_admits({term})) {
      fail(ErrorCode::allocation_impossible,
           "term '" + term +
               "' was classified quasi-identifying but cannot sit alone in "
               "an empty chunk");
    }
    commit(chunks.create_chunk(), term);
  }

  // Most-informative-first allocation of one risky set: the highest-IC term
  // is placed on its own, then the remaining members are attempted as one
  // block, falling back to per-term placement when no chunk admits them.
  void allocate_set_heuristic(const std::vector<std::string>& terms) {
    std::vector<std::string> ordered = terms;
    std::sort(ordered.begin(), ordered.end(),
              [this](const std::string& a, const std::string& b) {
                double ia = oracle.information_content(a);
                double ib = oracle.information_content(b);
                if (ia != ib) return ia > ib;
                return a < b;
              });
    allocate_term(ordered.front());
    if (ordered.size() == 1) return;

    std::vector<std::string> rest(ordered.begin() + 1, ordered.end());
    for (Chunk* c : probe_order()) {
      if (location_conflict(*c)) continue;
      if (merge_probe(*c, rest, policy, oracle)) {
        commit_block(*c, rest);
        return;
      }
    }
    if (fresh_admits(rest)) {
      commit_block(chunks.create_chunk(), rest);
      return;
    }
    for (const std::string& term : rest) allocate_term(term);
  }
};

}  // namespace

SplitPlan sanitize_and_plan(const TermSequence& doc,
                            const std::vector<RiskySet>& risky,
                            const PrivacyPolicy& policy,
                            const KnowledgeOracle& oracle, Strategy strategy,
                            ChunkSet& chunks, const SentinelConfig& sentinels) {
  SplitPlan plan;
  plan.doc_id = doc.doc_id;

  // Reading-order sentinel numbering across all replaced occurrences.
  std::map<std::size_t, const RiskySet*> replaced;  // token idx -> owner
  for (const RiskySet& rs : risky) {
    for (std::size_t tok : rs.token_indices) replaced[tok] = &rs;
  }
  std::map<std::size_t, std::size_t> sentinel_of;
  std::size_t ordinal = 0;
  for (const auto& [tok, _] : replaced) sentinel_of[tok] = ordinal++;

  for (const RiskySet& rs : risky) {
    if (rs.kind != RiskKind::identifier) continue;
    for (std::size_t tok : rs.token_indices) {
      plan.identifier_list.emplace_back(sentinel_of.at(tok),
                                        doc.tokens[tok].surface);
    }
  }
  std::sort(plan.identifier_list.begin(), plan.identifier_list.end());

  Allocation alloc{doc,   policy,      oracle, strategy,
                   chunks, sentinel_of, plan};
  switch (strategy) {
    case Strategy::naive:
    case Strategy::greedy_plain: {
      // Distinct quasi-identifying terms in document order.
      std::vector<std::string> order;
      for (const auto& [tok, owner] : replaced) {
        if (owner->kind != RiskKind::quasi_identifier_set) continue;
        const std::string& term = doc.tokens[tok].normalized;
        if (std::find(order.begin(), order.end(), term) == order.end()) {
          order.push_back(term);
        }
      }
      for (const std::string& term : order) {
        if (strategy == Strategy::naive) {
          alloc.allocate_fresh(term);
        } else {
          alloc.allocate_term(term);
        }
      }
      break;
    }
    case Strategy::greedy_heuristic: {
      for (const RiskySet& rs : risky) {
        if (rs.kind != RiskKind::quasi_identifier_set) continue;
        alloc.allocate_set_heuristic(rs.terms);
      }
      break;
    }
  }

  std::sort(plan.qid_assignments.begin(), plan.qid_assignments.end(),
            [](const QidAssignment& a, const QidAssignment& b) {
              return a.sentinel_index < b.sentinel_index;
            });

  // Rebuild the document with sentinels spliced over replaced occurrences.
  std::string out;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < doc.tokens.size(); ++i) {
    const Token& t = doc.tokens[i];
    out += doc.original.substr(pos, t.begin - pos);
    auto it = replaced.find(i);
    if (it == replaced.end()) {
      out += t.surface;
    } else if (it->second->kind == RiskKind::identifier) {
      out += sentinels.id;
    } else {
      out += sentinels.qid;
    }
    pos = t.end;
  }
  out += doc.original.substr(pos);
  plan.sanitized_text = std::move(out);

  // The core guarantee: every chunk this document touched stays below every
  // entity's threshold.
  for (std::uint64_t id : plan.chunks_touched) {
    const Chunk* chunk = chunks.find(id);
    if (chunk == nullptr ||
        oracle.check_disclosure(policy, chunk->term_set()).disclosing) {
      fail(ErrorCode::internal_error,
           "chunk invariant violated after allocation");
    }
  }
  return plan;
}

std::pair<Chunk*, std::size_t> allocate_update_entry(
    ChunkEntry entry, const PrivacyPolicy& policy,
    const KnowledgeOracle& oracle, ChunkSet& chunks,
    const std::set<std::string>& avoid_locations) {
  std::vector<Chunk*> order;
  for (Chunk& c : chunks.chunks()) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](const Chunk* a, const Chunk* b) {
    if (a->disclosure_score != b->disclosure_score) {
      return a->disclosure_score < b->disclosure_score;
    }
    return a->chunk_id < b->chunk_id;
  });

  Chunk* target = nullptr;
  for (Chunk* c : order) {
    if (c->location_id.has_value() && avoid_locations.count(*c->location_id)) {
      continue;
    }
    if (merge_probe(*c, {entry.normalized}, policy, oracle)) {
      target = c;
      break;
    }
  }
  if (target == nullptr) {
    Chunk probe;
    if (!merge_probe(probe, {entry.normalized}, policy, oracle)) {
      fail(ErrorCode::allocation_impossible,
           "term '" + entry.normalized +
               "' cannot sit alone in an empty chunk");
    }
    target = &chunks.create_chunk();
  }
  std::size_t offset = target->entries.size();
  target->entries.push_back(std::move(entry));
  target->disclosure_score =
      chunk_disclosure_score(target->term_set(), policy, oracle);
  return {target, offset};
}

}  // namespace semsplit
