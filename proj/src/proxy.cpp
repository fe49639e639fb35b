#include "semsplit/proxy.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <functional>
#include <future>
#include <memory>
#include <sstream>
#include <tuple>

#include "nlohmann/json.hpp"
#include "semsplit/errors.hpp"

namespace semsplit {

namespace {

using nlohmann::json;

// C(m, n) capped at cap + 1 to dodge overflow.
std::uint64_t combination_count(std::uint64_t m, std::uint64_t n,
                                std::uint64_t cap) {
  if (n > m) return 0;
  long double result = 1.0L;
  for (std::uint64_t i = 0; i < n; ++i) {
    result = result * static_cast<long double>(m - i) /
             static_cast<long double>(i + 1);
    if (result > static_cast<long double>(cap) + 1.0L) return cap + 1;
  }
  return static_cast<std::uint64_t>(result + 0.5L);
}

void validate_sentinels(const SentinelConfig& s) {
  if (s.id.empty() || s.qid.empty()) {
    fail(ErrorCode::config_error, "sentinel strings must be non-empty");
  }
  if (s.id == s.qid || s.id.find(s.qid) != std::string::npos ||
      s.qid.find(s.id) != std::string::npos) {
    fail(ErrorCode::config_error,
         "sentinel strings must be distinct and neither may contain the "
         "other");
  }
  if (s.id.find('\n') != std::string::npos ||
      s.qid.find('\n') != std::string::npos) {
    fail(ErrorCode::config_error, "sentinel strings must not contain LF");
  }
}

// Runs the undo steps in reverse, best-effort.
void run_rollback(std::vector<std::function<void()>>& undo) {
  for (auto it = undo.rbegin(); it != undo.rend(); ++it) {
    try {
      (*it)();
    } catch (...) {
      // Rollback is best-effort; the original error wins.
    }
  }
}

// ------------------------------------------------ boolean expressions ----

struct BoolNode {
  enum class Kind { keyword, negation, conjunction, disjunction };
  Kind kind = Kind::keyword;
  std::string keyword;
  std::unique_ptr<BoolNode> left;
  std::unique_ptr<BoolNode> right;
};

struct BoolToken {
  enum class Kind { word, quoted, lparen, rparen, op_and, op_or, op_not };
  Kind kind;
  std::string text;
};

std::vector<BoolToken> lex_expression(const std::string& expr) {
  std::vector<BoolToken> tokens;
  std::size_t i = 0;
  while (i < expr.size()) {
    char c = expr[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '(') {
      tokens.push_back({BoolToken::Kind::lparen, "("});
      ++i;
      continue;
    }
    if (c == ')') {
      tokens.push_back({BoolToken::Kind::rparen, ")"});
      ++i;
      continue;
    }
    if (c == '"') {
      std::size_t close = expr.find('"', i + 1);
      if (close == std::string::npos) {
        fail(ErrorCode::parse_error, "unterminated quote in expression");
      }
      tokens.push_back(
          {BoolToken::Kind::quoted, expr.substr(i + 1, close - i - 1)});
      i = close + 1;
      continue;
    }
    std::size_t start = i;
    while (i < expr.size() && expr[i] != ' ' && expr[i] != '\t' &&
           expr[i] != '\n' && expr[i] != '\r' && expr[i] != '(' &&
           expr[i] != ')' && expr[i] != '"') {
      ++i;
    }
    std::string word = expr.substr(start, i - start);
    if (word == "AND") {
      tokens.push_back({BoolToken::Kind::op_and, word});
    } else if (word == "OR") {
      tokens.push_back({BoolToken::Kind::op_or, word});
    } else if (word == "NOT") {
      tokens.push_back({BoolToken::Kind::op_not, word});
    } else {
      tokens.push_back({BoolToken::Kind::word, word});
    }
  }
  return tokens;
}

// Grammar: or := and (OR and)* ; and := not (AND not)* ;
// not := NOT not | primary ; primary := ( or ) | keyword.
class BoolParser {
 public:
  explicit BoolParser(std::vector<BoolToken> tokens)
      : tokens_(std::move(tokens)) {}

  std::unique_ptr<BoolNode> parse() {
    if (tokens_.empty()) {
      fail(ErrorCode::parse_error, "empty search expression");
    }
    auto node = parse_or();
    if (pos_ != tokens_.size()) {
      fail(ErrorCode::parse_error,
           "unexpected '" + tokens_[pos_].text + "' in expression");
    }
    return node;
  }

 private:
  bool at(BoolToken::Kind kind) const {
    return pos_ < tokens_.size() && tokens_[pos_].kind == kind;
  }

  std::unique_ptr<BoolNode> parse_or() {
    auto left = parse_and();
    while (at(BoolToken::Kind::op_or)) {
      ++pos_;
      auto node = std::make_unique<BoolNode>();
      node->kind = BoolNode::Kind::disjunction;
      node->left = std::move(left);
      node->right = parse_and();
      left = std::move(node);
    }
    return left;
  }

  std::unique_ptr<BoolNode> parse_and() {
    auto left = parse_not();
    while (at(BoolToken::Kind::op_and)) {
      ++pos_;
      auto node = std::make_unique<BoolNode>();
      node->kind = BoolNode::Kind::conjunction;
      node->left = std::move(left);
      node->right = parse_not();
      left = std::move(node);
    }
    return left;
  }

  std::unique_ptr<BoolNode> parse_not() {
    if (at(BoolToken::Kind::op_not)) {
      ++pos_;
      auto node = std::make_unique<BoolNode>();
      node->kind = BoolNode::Kind::negation;
      node->left = parse_not();
      return node;
    }
    return parse_primary();
  }

  std::unique_ptr<BoolNode> parse_primary() {
    if (pos_ >= tokens_.size()) {
      fail(ErrorCode::parse_error, "expression ends where a keyword is due");
    }
    const BoolToken& tok = tokens_[pos_];
    if (tok.kind == BoolToken::Kind::lparen) {
      ++pos_;
      auto node = parse_or();
      if (!at(BoolToken::Kind::rparen)) {
        fail(ErrorCode::parse_error, "missing ')' in expression");
      }
      ++pos_;
      return node;
    }
    if (tok.kind == BoolToken::Kind::word ||
        tok.kind == BoolToken::Kind::quoted) {
      auto node = std::make_unique<BoolNode>();
      node->kind = BoolNode::Kind::keyword;
      node->keyword = tok.text;
      ++pos_;
      return node;
    }
    fail(ErrorCode::parse_error,
         "expected a keyword, found '" + tok.text + "'");
  }

  std::vector<BoolToken> tokens_;
  std::size_t pos_ = 0;
};

void collect_keywords(const BoolNode& node, std::set<std::string>& out) {
  if (node.kind == BoolNode::Kind::keyword) {
    out.insert(node.keyword);
    return;
  }
  if (node.left) collect_keywords(*node.left, out);
  if (node.right) collect_keywords(*node.right, out);
}

bool eval_node(const BoolNode& node, const std::string& doc_id,
               const std::map<std::string, std::map<std::string, bool>>&
                   keyword_matches) {
  switch (node.kind) {
    case BoolNode::Kind::keyword:
      return keyword_matches.at(node.keyword).at(doc_id);
    case BoolNode::Kind::negation:
      return !eval_node(*node.left, doc_id, keyword_matches);
    case BoolNode::Kind::conjunction:
      return eval_node(*node.left, doc_id, keyword_matches) &&
             eval_node(*node.right, doc_id, keyword_matches);
    case BoolNode::Kind::disjunction:
      return eval_node(*node.left, doc_id, keyword_matches) ||
             eval_node(*node.right, doc_id, keyword_matches);
  }
  return false;
}

}  // namespace

std::vector<std::string> QueryResult::matching_docs() const {
  std::vector<std::string> out;
  for (const auto& [doc_id, matched] : matches) {
    if (matched) out.push_back(doc_id);
  }
  return out;
}

Proxy::Proxy(const CorpusIndex& index, PrivacyPolicy policy,
             TokenizerConfig tokenizer, LocationPool& pool,
             ProxyOptions options)
    : index_(index),
      policy_(std::move(policy)),
      tokenizer_(std::move(tokenizer)),
      pool_(pool),
      options_(std::move(options)),
      oracle_(index, options_.epsilon) {
  validate_sentinels(options_.sentinels);
  if (options_.detection.max_cardinality < 1) {
    fail(ErrorCode::config_error, "max cardinality must be >= 1");
  }
  oracle_.validate_policy(policy_);
  if (pool_.empty()) fail(ErrorCode::config_error, "empty location pool");
}

const DocMetadata& Proxy::require_doc(const std::string& doc_id) const {
  auto it = metadata_.find(doc_id);
  if (it == metadata_.end()) {
    fail(ErrorCode::unknown_doc, "unknown document: " + doc_id);
  }
  return it->second;
}

// ---------------------------------------------------------- outsource ----

OutsourceReceipt Proxy::outsource(std::string doc_id,
                                  const std::string& raw_document) {
  std::unique_lock lock(mutex_);
  if (doc_id.empty()) {
    do {
      doc_id = "doc-" + std::to_string(next_doc_number_++);
    } while (metadata_.count(doc_id));
  } else if (metadata_.count(doc_id)) {
    fail(ErrorCode::config_error, "doc_id already outsourced: " + doc_id);
  }
  if (raw_document.find(options_.sentinels.id) != std::string::npos ||
      raw_document.find(options_.sentinels.qid) != std::string::npos) {
    fail(ErrorCode::config_error,
         "document contains a reserved sentinel marker");
  }

  TermSequence seq = extract_terms(raw_document, tokenizer_);
  seq.doc_id = doc_id;
  std::vector<RiskySet> risky =
      detect_risky_terms(seq, policy_, oracle_, options_.detection);
  for (const RiskySet& rs : risky) {
    if (rs.kind != RiskKind::quasi_identifier_set) continue;
    for (std::size_t tok : rs.token_indices) {
      if (seq.tokens[tok].surface.find('\n') != std::string::npos) {
        fail(ErrorCode::config_error,
             "quasi-identifying occurrence of '" + seq.tokens[tok].normalized +
                 "' spans a line break and cannot be stored as a chunk entry");
      }
    }
  }

  // Plan against a staged copy so a failure leaves the shared pool pristine.
  ChunkSet staged = chunks_;
  SplitPlan plan = sanitize_and_plan(seq, risky, policy_, oracle_,
                                     options_.strategy, staged,
                                     options_.sentinels);
  std::string doc_location = assign_locations(plan.chunks_touched, staged,
                                              pool_);

  std::vector<std::function<void()>> undo;
  try {
    for (std::uint64_t id : plan.chunks_touched) {
      Chunk& chunk = *staged.find(id);
      Location& loc = pool_.at(*chunk.location_id);
      if (!chunk.handle) {
        std::vector<std::string> stored;
        for (const ChunkEntry& e : chunk.entries) {
          stored.push_back(e.tombstone ? kTombstoneEntry : e.surface);
        }
        std::string handle = loc.store(join_entries(stored));
        chunk.handle = handle;
        undo.push_back([&loc, handle] { loc.remove(handle); });
      } else {
        const Chunk* pristine = chunks_.find(id);
        if (pristine == nullptr) {
          fail(ErrorCode::internal_error,
               "stored chunk missing from the pristine set");
        }
        std::size_t prior = pristine->entries.size();
        if (chunk.entries.size() == prior) continue;
        std::vector<std::string> prefix;
        for (const ChunkEntry& e : pristine->entries) {
          prefix.push_back(e.tombstone ? kTombstoneEntry : e.surface);
        }
        std::string handle = *chunk.handle;
        undo.push_back([&loc, handle, prefix] {
          loc.overwrite(handle, join_entries(prefix));
        });
        for (std::size_t j = prior; j < chunk.entries.size(); ++j) {
          std::size_t off = loc.append_entry(handle, chunk.entries[j].surface);
          if (off != j) {
            fail(ErrorCode::internal_error,
                 "stored chunk offsets diverged from the plan");
          }
        }
      }
    }

    Location& doc_loc = pool_.at(doc_location);
    std::string doc_handle = doc_loc.store(plan.sanitized_text);
    undo.push_back([&doc_loc, doc_handle] { doc_loc.remove(doc_handle); });

    DocMetadata meta;
    meta.doc_id = doc_id;
    meta.user_id = options_.user_id;
    for (const auto& id_occurrence : plan.identifier_list) {
      meta.sort_list_ids.push_back(id_occurrence.second);
    }
    for (const QidAssignment& qa : plan.qid_assignments) {
      const Chunk& chunk = *staged.find(qa.chunk_id);
      meta.sort_list_cloc.push_back(
          {*chunk.location_id, *chunk.handle, qa.offset_within_chunk});
    }
    meta.doc_cloc = {doc_location, doc_handle};
    meta.policy_fingerprint = policy_.fingerprint();

    chunks_ = std::move(staged);
    metadata_.emplace(doc_id, std::move(meta));
  } catch (...) {
    run_rollback(undo);
    throw;
  }

  OutsourceReceipt receipt;
  receipt.doc_id = doc_id;
  receipt.identifier_occurrences = plan.identifier_list.size();
  receipt.qid_occurrences = plan.qid_assignments.size();
  receipt.content_terms = seq.content_token_count();
  receipt.chunks_touched = plan.chunks_touched;
  return receipt;
}

// ------------------------------------------------------------ fetches ----

std::map<std::pair<std::string, std::string>, std::string>
Proxy::fetch_items(
    const std::set<std::pair<std::string, std::string>>& refs) const {
  std::map<std::string, std::vector<std::string>> by_location;
  for (const auto& [location_id, handle] : refs) {
    if (!pool_.has(location_id)) {
      fail(ErrorCode::metadata_corrupt,
           "metadata references unknown location " + location_id);
    }
    by_location[location_id].push_back(handle);
  }

  // One request per distinct location, in parallel; aggregation order is
  // the sorted location order, independent of completion order.
  std::vector<std::pair<std::string,
                        std::future<std::vector<std::string>>>> futures;
  for (const auto& [location_id, handles] : by_location) {
    const Location& loc = pool_.at(location_id);
    futures.emplace_back(
        location_id,
        std::async(std::launch::async, [&loc, handles] {
          std::vector<std::string> payloads;
          payloads.reserve(handles.size());
          for (const std::string& h : handles) payloads.push_back(loc.fetch(h));
          return payloads;
        }));
  }

  std::map<std::pair<std::string, std::string>, std::string> items;
  for (auto& [location_id, future] : futures) {
    std::vector<std::string> payloads;
    try {
      payloads = future.get();
    } catch (const Error& e) {
      if (e.code() == ErrorCode::unknown_handle) {
        fail(ErrorCode::missing_item,
             std::string("a location lost data: ") + e.what());
      }
      throw;
    }
    const auto& handles = by_location.at(location_id);
    for (std::size_t i = 0; i < handles.size(); ++i) {
      items[{location_id, handles[i]}] = std::move(payloads[i]);
    }
  }
  return items;
}

// ------------------------------------------------------ reconstruction ----

Proxy::Reconstruction Proxy::reconstruct(const DocMetadata& meta) const {
  std::set<std::pair<std::string, std::string>> refs;
  refs.insert(meta.doc_cloc);
  for (const ClocRef& ref : meta.sort_list_cloc) {
    refs.insert({ref.location_id, ref.handle});
  }
  auto items = fetch_items(refs);

  Reconstruction rec;
  rec.dprime = items.at(meta.doc_cloc);

  auto qid_surface = [&](std::size_t k) {
    const ClocRef& ref = meta.sort_list_cloc[k];
    std::vector<std::string> entries =
        payload_entries(items.at({ref.location_id, ref.handle}));
    if (ref.offset >= entries.size()) {
      fail(ErrorCode::metadata_corrupt,
           "chunk offset " + std::to_string(ref.offset) +
               " is outside the stored payload");
    }
    if (entries[ref.offset] == kTombstoneEntry) {
      fail(ErrorCode::metadata_corrupt,
           "metadata references a deleted chunk entry");
    }
    return entries[ref.offset];
  };

  const std::string& sid = options_.sentinels.id;
  const std::string& sqid = options_.sentinels.qid;
  std::size_t pos = 0;
  std::size_t id_k = 0;
  std::size_t qid_k = 0;
  while (true) {
    std::size_t pi = rec.dprime.find(sid, pos);
    std::size_t pq = rec.dprime.find(sqid, pos);
    if (pi == std::string::npos && pq == std::string::npos) break;
    bool is_qid =
        pq != std::string::npos && (pi == std::string::npos || pq < pi);
    std::size_t at = is_qid ? pq : pi;
    const std::string& sentinel = is_qid ? sqid : sid;

    rec.original.append(rec.dprime, pos, at - pos);
    std::string surface;
    if (is_qid) {
      if (qid_k >= meta.sort_list_cloc.size()) {
        fail(ErrorCode::metadata_corrupt,
             "more quasi-identifier sentinels than metadata entries");
      }
      surface = qid_surface(qid_k);
    } else {
      if (id_k >= meta.sort_list_ids.size()) {
        fail(ErrorCode::metadata_corrupt,
             "more identifier sentinels than metadata entries");
      }
      surface = meta.sort_list_ids[id_k];
    }

    RiskySpan span;
    span.is_qid = is_qid;
    span.ordinal = is_qid ? qid_k : id_k;
    span.orig_begin = rec.original.size();
    span.orig_end = span.orig_begin + surface.size();
    span.dprime_begin = at;
    span.dprime_end = at + sentinel.size();
    rec.spans.push_back(span);

    rec.original += surface;
    if (is_qid) {
      ++qid_k;
    } else {
      ++id_k;
    }
    pos = at + sentinel.size();
  }
  rec.original.append(rec.dprime, pos, std::string::npos);

  if (id_k != meta.sort_list_ids.size() ||
      qid_k != meta.sort_list_cloc.size()) {
    fail(ErrorCode::metadata_corrupt,
         "sentinel counts disagree with the metadata lists");
  }
  return rec;
}

std::size_t Proxy::orig_to_dprime(const Reconstruction& rec,
                                  std::size_t pos) const {
  std::int64_t delta = 0;
  for (const RiskySpan& s : rec.spans) {
    if (pos <= s.orig_begin) break;
    if (pos < s.orig_end) {
      fail(ErrorCode::internal_error,
           "byte position falls inside a replaced span");
    }
    delta += static_cast<std::int64_t>(s.dprime_end - s.dprime_begin) -
             static_cast<std::int64_t>(s.orig_end - s.orig_begin);
  }
  return static_cast<std::size_t>(static_cast<std::int64_t>(pos) + delta);
}

std::string Proxy::retrieve(const std::string& doc_id) const {
  std::shared_lock lock(mutex_);
  return reconstruct(require_doc(doc_id)).original;
}

// -------------------------------------------------------------- search ----

QueryResult Proxy::keyword_search(const std::string& keyword,
                                  const std::set<std::string>& scope) const {
  std::shared_lock lock(mutex_);
  std::set<std::string> docs;
  if (scope.empty()) {
    for (const auto& [doc_id, meta] : metadata_) docs.insert(doc_id);
  } else {
    for (const std::string& doc_id : scope) {
      require_doc(doc_id);
      docs.insert(doc_id);
    }
  }

  QueryResult result;
  std::map<std::string, bool> matches = [&] {
    std::map<std::string, std::map<std::string, bool>> one;
    one[keyword] = {};
    evaluate_keywords(one, docs);
    return one[keyword];
  }();
  result.matches = std::move(matches);
  return result;
}

QueryResult Proxy::boolean_search(const std::string& expr,
                                  const std::set<std::string>& scope) const {
  std::shared_lock lock(mutex_);
  std::set<std::string> docs;
  if (scope.empty()) {
    for (const auto& [doc_id, meta] : metadata_) docs.insert(doc_id);
  } else {
    for (const std::string& doc_id : scope) {
      require_doc(doc_id);
      docs.insert(doc_id);
    }
  }

  BoolParser parser(lex_expression(expr));
  std::unique_ptr<BoolNode> root = parser.parse();

  std::set<std::string> keywords;
  collect_keywords(*root, keywords);
  std::map<std::string, std::map<std::string, bool>> keyword_matches;
  for (const std::string& k : keywords) keyword_matches[k] = {};
  evaluate_keywords(keyword_matches, docs);

  QueryResult result;
  for (const std::string& doc_id : docs) {
    result.matches[doc_id] = eval_node(*root, doc_id, keyword_matches);
  }
  return result;
}

void Proxy::evaluate_keywords(
    std::map<std::string, std::map<std::string, bool>>& keyword_matches,
    const std::set<std::string>& docs) const {
  // Local identifier lists answer immediately; everything else is
  // broadcast to every location and mapped back through the metadata.
  std::map<std::tuple<std::string, std::string, std::size_t>, std::string>
      qid_owner;
  std::map<std::pair<std::string, std::string>, std::string> dprime_owner;
  for (const std::string& doc_id : docs) {
    const DocMetadata& meta = metadata_.at(doc_id);
    for (const ClocRef& ref : meta.sort_list_cloc) {
      qid_owner[{ref.location_id, ref.handle, ref.offset}] = doc_id;
    }
    dprime_owner[meta.doc_cloc] = doc_id;
  }

  for (auto& [keyword, matches] : keyword_matches) {
    for (const std::string& doc_id : docs) matches[doc_id] = false;
    std::vector<std::string> needle_words = normalize_words(keyword);
    if (needle_words.empty()) continue;

    for (const std::string& doc_id : docs) {
      const DocMetadata& meta = metadata_.at(doc_id);
      for (const std::string& surface : meta.sort_list_ids) {
        if (word_sequence_contains(normalize_words(surface), needle_words)) {
          matches[doc_id] = true;
          break;
        }
      }
    }

    // Broadcast: every location matches in parallel; hits are folded in
    // pool order so aggregation is deterministic.
    std::vector<std::future<std::vector<SearchHit>>> futures;
    for (const Location& loc : pool_.locations()) {
      futures.push_back(std::async(std::launch::async, [&loc, &keyword] {
        return loc.search(keyword);
      }));
    }
    std::size_t loc_index = 0;
    for (const Location& loc : pool_.locations()) {
      std::vector<SearchHit> hits = futures[loc_index++].get();
      for (const SearchHit& hit : hits) {
        auto qid_it =
            qid_owner.find({loc.location_id(), hit.handle, hit.offset});
        if (qid_it != qid_owner.end()) matches[qid_it->second] = true;
        auto dp_it = dprime_owner.find({loc.location_id(), hit.handle});
        if (dp_it != dprime_owner.end()) matches[dp_it->second] = true;
      }
    }
  }
}

// ------------------------------------------------------------- updates ----

Proxy::TermClass Proxy::classify_new_term(
    const std::string& normalized, const std::set<std::string>& visible) const {
  for (const PolicyEntry& entry : policy_.entries) {
    if (KnowledgeOracle::exact_match(entry, {normalized})) {
      return TermClass::identifier;
    }
  }
  if (oracle_.check_disclosure(policy_, {normalized}).disclosing) {
    return TermClass::identifier;
  }

  std::vector<std::string> pool(visible.begin(), visible.end());
  pool.erase(std::remove(pool.begin(), pool.end(), normalized), pool.end());
  std::size_t max_n = options_.detection.max_cardinality;
  for (std::size_t n = 1; n + 1 <= max_n && n <= pool.size(); ++n) {
    if (combination_count(pool.size(), n,
                          options_.detection.combination_budget) >
        options_.detection.combination_budget) {
      fail(ErrorCode::combination_budget_exceeded,
           "too many candidate combinations while classifying an edit");
    }
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    bool more = true;
    while (more) {
      std::vector<std::string> terms;
      terms.reserve(n + 1);
      for (std::size_t i : idx) terms.push_back(pool[i]);
      terms.push_back(normalized);
      if (oracle_.check_disclosure(policy_, terms).disclosing) {
        return TermClass::quasi;
      }
      more = false;
      for (std::size_t k = n; k-- > 0;) {
        if (idx[k] != k + pool.size() - n) {
          ++idx[k];
          for (std::size_t j = k + 1; j < n; ++j) idx[j] = idx[j - 1] + 1;
          more = true;
          break;
        }
      }
    }
  }
  return TermClass::plain;
}

namespace {

std::string splice(const std::string& s, std::size_t begin, std::size_t end,
                   const std::string& replacement) {
  std::string out;
  out.reserve(s.size() - (end - begin) + replacement.size());
  out.append(s, 0, begin);
  out += replacement;
  out.append(s, end, std::string::npos);
  return out;
}

// Keeps chunk-entry sentinel ordinals in step with a sort-list edit.
void shift_doc_qids(ChunkSet& chunks, const std::string& doc_id,
                    std::size_t from, std::int64_t delta) {
  for (Chunk& c : chunks.chunks()) {
    for (ChunkEntry& e : c.entries) {
      if (!e.tombstone && e.doc_id == doc_id && e.sentinel_index >= from) {
        e.sentinel_index = static_cast<std::size_t>(
            static_cast<std::int64_t>(e.sentinel_index) + delta);
      }
    }
  }
}

struct UpdateText {
  Token token;
  std::string normalized;  // empty when the term is not content
};

UpdateText validate_update_text(const std::string& text,
                                const SentinelConfig& sentinels,
                                const TokenizerConfig& tokenizer,
                                const char* what) {
  if (text.find(sentinels.id) != std::string::npos ||
      text.find(sentinels.qid) != std::string::npos) {
    fail(ErrorCode::config_error,
         std::string(what) + " contains a reserved sentinel marker");
  }
  if (text.find('\n') != std::string::npos) {
    fail(ErrorCode::config_error,
         std::string(what) + " must not contain a line break");
  }
  TermSequence seq = extract_terms(text, tokenizer);
  if (seq.tokens.size() != 1 || seq.tokens[0].begin != 0 ||
      seq.tokens[0].end != text.size()) {
    fail(ErrorCode::config_error,
         std::string(what) + " must be a single term");
  }
  UpdateText out;
  out.token = seq.tokens[0];
  if (out.token.is_content) out.normalized = out.token.normalized;
  return out;
}

}  // namespace

Chunk* Proxy::find_chunk_by_ref(ChunkSet& chunks, const ClocRef& ref) const {
  for (Chunk& c : chunks.chunks()) {
    if (c.handle && *c.handle == ref.handle && c.location_id &&
        *c.location_id == ref.location_id) {
      return &c;
    }
  }
  return nullptr;
}

std::set<std::string> Proxy::locations_used_by(const DocMetadata& meta,
                                               const ChunkSet&) const {
  std::set<std::string> used;
  for (const ClocRef& ref : meta.sort_list_cloc) used.insert(ref.location_id);
  used.insert(meta.doc_cloc.first);
  return used;
}

void Proxy::assert_chunks_safe(const ChunkSet& chunks,
                               const std::set<std::uint64_t>& ids) const {
  for (std::uint64_t id : ids) {
    const Chunk* chunk = chunks.find(id);
    if (chunk == nullptr ||
        oracle_.check_disclosure(policy_, chunk->term_set()).disclosing) {
      fail(ErrorCode::internal_error,
           "chunk invariant violated after an update");
    }
  }
}

void Proxy::delete_term(const std::string& doc_id, std::size_t position) {
  std::unique_lock lock(mutex_);
  const DocMetadata& current = require_doc(doc_id);
  if (current.policy_fingerprint != policy_.fingerprint()) {
    fail(ErrorCode::config_error,
         "document was outsourced under a different policy");
  }
  Reconstruction rec = reconstruct(current);
  TermSequence seq = extract_terms(rec.original, tokenizer_);
  std::vector<std::size_t> content_idx;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (seq.tokens[i].is_content) content_idx.push_back(i);
  }
  if (position >= content_idx.size()) {
    fail(ErrorCode::invalid_position,
         "position " + std::to_string(position) + " is out of range (" +
             std::to_string(content_idx.size()) + " content terms)");
  }
  const Token& tok = seq.tokens[content_idx[position]];
  const RiskySpan* span = nullptr;
  for (const RiskySpan& s : rec.spans) {
    if (s.orig_begin == tok.begin && s.orig_end == tok.end) {
      span = &s;
      break;
    }
    if (s.orig_begin < tok.end && tok.begin < s.orig_end) {
      fail(ErrorCode::metadata_corrupt,
           "a stored occurrence does not align with a document term");
    }
  }

  ChunkSet staged = chunks_;
  DocMetadata meta = current;
  std::vector<std::function<void()>> undo;
  std::set<std::uint64_t> touched;
  std::string new_dprime = rec.dprime;

  try {
    if (span == nullptr) {
      std::size_t db = orig_to_dprime(rec, tok.begin);
      std::size_t de = orig_to_dprime(rec, tok.end);
      new_dprime = splice(new_dprime, db, de, "");
    } else if (!span->is_qid) {
      meta.sort_list_ids.erase(meta.sort_list_ids.begin() +
                               static_cast<std::ptrdiff_t>(span->ordinal));
      new_dprime =
          splice(new_dprime, span->dprime_begin, span->dprime_end, "");
    } else {
      ClocRef ref = meta.sort_list_cloc[span->ordinal];
      Chunk* chunk = find_chunk_by_ref(staged, ref);
      if (chunk == nullptr || ref.offset >= chunk->entries.size() ||
          chunk->entries[ref.offset].tombstone) {
        fail(ErrorCode::metadata_corrupt,
             "metadata references an unknown chunk entry");
      }
      Location& loc = pool_.at(ref.location_id);
      std::string before = loc.fetch(ref.handle);
      loc.delete_entry(ref.handle, ref.offset);
      undo.push_back(
          [&loc, h = ref.handle, before] { loc.overwrite(h, before); });
      ChunkEntry& entry = chunk->entries[ref.offset];
      entry.tombstone = true;
      entry.surface.clear();
      entry.normalized.clear();
      entry.doc_id.clear();
      entry.sentinel_index = 0;
      chunk->disclosure_score =
          chunk_disclosure_score(chunk->term_set(), policy_, oracle_);
      touched.insert(chunk->chunk_id);
      meta.sort_list_cloc.erase(meta.sort_list_cloc.begin() +
                                static_cast<std::ptrdiff_t>(span->ordinal));
      shift_doc_qids(staged, doc_id, span->ordinal + 1, -1);
      new_dprime =
          splice(new_dprime, span->dprime_begin, span->dprime_end, "");
    }

    if (new_dprime != rec.dprime) {
      Location& dloc = pool_.at(meta.doc_cloc.first);
      std::string before = rec.dprime;
      dloc.overwrite(meta.doc_cloc.second, new_dprime);
      undo.push_back([&dloc, h = meta.doc_cloc.second, before] {
        dloc.overwrite(h, before);
      });
    }
    assert_chunks_safe(staged, touched);
    chunks_ = std::move(staged);
    metadata_[doc_id] = std::move(meta);
  } catch (...) {
    run_rollback(undo);
    throw;
  }
}

void Proxy::replace_term(const std::string& doc_id, std::size_t position,
                         const std::string& new_text) {
  std::unique_lock lock(mutex_);
  const DocMetadata& current = require_doc(doc_id);
  if (current.policy_fingerprint != policy_.fingerprint()) {
    fail(ErrorCode::config_error,
         "document was outsourced under a different policy");
  }
  UpdateText replacement = validate_update_text(
      new_text, options_.sentinels, tokenizer_, "the replacement");

  Reconstruction rec = reconstruct(current);
  TermSequence seq = extract_terms(rec.original, tokenizer_);
  std::vector<std::size_t> content_idx;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (seq.tokens[i].is_content) content_idx.push_back(i);
  }
  if (position >= content_idx.size()) {
    fail(ErrorCode::invalid_position,
         "position " + std::to_string(position) + " is out of range (" +
             std::to_string(content_idx.size()) + " content terms)");
  }
  const Token& tok = seq.tokens[content_idx[position]];
  const RiskySpan* span = nullptr;
  for (const RiskySpan& s : rec.spans) {
    if (s.orig_begin == tok.begin && s.orig_end == tok.end) {
      span = &s;
      break;
    }
    if (s.orig_begin < tok.end && tok.begin < s.orig_end) {
      fail(ErrorCode::metadata_corrupt,
           "a stored occurrence does not align with a document term");
    }
  }

  auto covered = [&](const Token& t) {
    for (const RiskySpan& s : rec.spans) {
      if (s.orig_begin <= t.begin && t.end <= s.orig_end) return true;
    }
    return false;
  };
  std::set<std::string> visible;
  for (std::size_t ci = 0; ci < content_idx.size(); ++ci) {
    if (ci == position) continue;  // the occurrence being displaced
    const Token& t = seq.tokens[content_idx[ci]];
    if (covered(t)) continue;
    visible.insert(t.normalized);
  }
  TermClass cls = replacement.token.is_content
                      ? classify_new_term(replacement.normalized, visible)
                      : TermClass::plain;

  ChunkSet staged = chunks_;
  DocMetadata meta = current;
  std::vector<std::function<void()>> undo;
  std::set<std::uint64_t> touched;
  std::string new_dprime = rec.dprime;

  auto count_before = [&](bool qid, std::size_t orig_begin) {
    std::size_t n = 0;
    for (const RiskySpan& s : rec.spans) {
      if (s.is_qid == qid && s.orig_begin < orig_begin) ++n;
    }
    return n;
  };

  // Places the replacement as a quasi-identifier entry and returns its
  // cloud location reference. Mutates staged chunks and storage.
  auto allocate_qid = [&](std::size_t sentinel_index,
                          const std::set<std::string>& avoid) {
    ChunkEntry e;
    e.surface = new_text;
    e.normalized = replacement.normalized;
    e.doc_id = doc_id;
    e.sentinel_index = sentinel_index;
    auto [chunk, offset] =
        allocate_update_entry(std::move(e), policy_, oracle_, staged, avoid);
    if (!chunk->location_id) {
      chunk->location_id = least_loaded_location(pool_, avoid);
    }
    Location& loc = pool_.at(*chunk->location_id);
    if (!chunk->handle) {
      std::vector<std::string> stored;
      for (const ChunkEntry& en : chunk->entries) {
        stored.push_back(en.tombstone ? kTombstoneEntry : en.surface);
      }
      std::string h = loc.store(join_entries(stored));
      chunk->handle = h;
      undo.push_back([&loc, h] { loc.remove(h); });
    } else {
      std::string before = loc.fetch(*chunk->handle);
      std::size_t off = loc.append_entry(*chunk->handle, new_text);
      undo.push_back(
          [&loc, h = *chunk->handle, before] { loc.overwrite(h, before); });
      if (off != offset) {
        fail(ErrorCode::internal_error,
             "stored chunk offsets diverged from the plan");
      }
    }
    touched.insert(chunk->chunk_id);
    return ClocRef{*chunk->location_id, *chunk->handle, offset};
  };

  try {
    if (span == nullptr) {  // the old occurrence is plain
      std::size_t db = orig_to_dprime(rec, tok.begin);
      std::size_t de = orig_to_dprime(rec, tok.end);
      if (cls == TermClass::identifier) {
        std::size_t at = count_before(false, tok.begin);
        meta.sort_list_ids.insert(
            meta.sort_list_ids.begin() + static_cast<std::ptrdiff_t>(at),
            new_text);
        new_dprime = splice(new_dprime, db, de, options_.sentinels.id);
      } else if (cls == TermClass::quasi) {
        std::size_t at = count_before(true, tok.begin);
        shift_doc_qids(staged, doc_id, at, +1);
        ClocRef ref = allocate_qid(at, locations_used_by(meta, staged));
        meta.sort_list_cloc.insert(
            meta.sort_list_cloc.begin() + static_cast<std::ptrdiff_t>(at),
            ref);
        new_dprime = splice(new_dprime, db, de, options_.sentinels.qid);
      } else {
        new_dprime = splice(new_dprime, db, de, new_text);
      }
    } else if (!span->is_qid) {  // the old occurrence is an identifier
      std::size_t o = span->ordinal;
      if (cls == TermClass::identifier) {
        meta.sort_list_ids[o] = new_text;  // local swap; nothing else moves
      } else if (cls == TermClass::quasi) {
        meta.sort_list_ids.erase(meta.sort_list_ids.begin() +
                                 static_cast<std::ptrdiff_t>(o));
        std::size_t at = count_before(true, span->orig_begin);
        shift_doc_qids(staged, doc_id, at, +1);
        ClocRef ref = allocate_qid(at, locations_used_by(meta, staged));
        meta.sort_list_cloc.insert(
            meta.sort_list_cloc.begin() + static_cast<std::ptrdiff_t>(at),
            ref);
        new_dprime = splice(new_dprime, span->dprime_begin, span->dprime_end,
                            options_.sentinels.qid);
      } else {
        meta.sort_list_ids.erase(meta.sort_list_ids.begin() +
                                 static_cast<std::ptrdiff_t>(o));
        new_dprime = splice(new_dprime, span->dprime_begin, span->dprime_end,
                            new_text);
      }
    } else {  // the old occurrence is a quasi-identifier
      std::size_t o = span->ordinal;
      ClocRef old_ref = meta.sort_list_cloc[o];
      Chunk* old_chunk = find_chunk_by_ref(staged, old_ref);
      if (old_chunk == nullptr ||
          old_ref.offset >= old_chunk->entries.size() ||
          old_chunk->entries[old_ref.offset].tombstone) {
        fail(ErrorCode::metadata_corrupt,
             "metadata references an unknown chunk entry");
      }
      Location& old_loc = pool_.at(old_ref.location_id);

      auto tombstone_old = [&] {
        std::string before = old_loc.fetch(old_ref.handle);
        old_loc.delete_entry(old_ref.handle, old_ref.offset);
        undo.push_back([&old_loc, h = old_ref.handle, before] {
          old_loc.overwrite(h, before);
        });
        ChunkEntry& en = old_chunk->entries[old_ref.offset];
        en.tombstone = true;
        en.surface.clear();
        en.normalized.clear();
        en.doc_id.clear();
        en.sentinel_index = 0;
        old_chunk->disclosure_score =
            chunk_disclosure_score(old_chunk->term_set(), policy_, oracle_);
        touched.insert(old_chunk->chunk_id);
      };

      if (cls == TermClass::identifier) {
        tombstone_old();
        meta.sort_list_cloc.erase(meta.sort_list_cloc.begin() +
                                  static_cast<std::ptrdiff_t>(o));
        shift_doc_qids(staged, doc_id, o + 1, -1);
        std::size_t at = count_before(false, span->orig_begin);
        meta.sort_list_ids.insert(
            meta.sort_list_ids.begin() + static_cast<std::ptrdiff_t>(at),
            new_text);
        new_dprime = splice(new_dprime, span->dprime_begin, span->dprime_end,
                            options_.sentinels.id);
      } else if (cls == TermClass::quasi) {
        // Probe the current chunk with the old entry swapped out.
        std::set<std::string> probe;
        for (std::size_t j = 0; j < old_chunk->entries.size(); ++j) {
          const ChunkEntry& en = old_chunk->entries[j];
          if (en.tombstone || j == old_ref.offset) continue;
          probe.insert(en.normalized);
        }
        probe.insert(replacement.normalized);
        std::vector<std::string> probe_terms(probe.begin(), probe.end());
        if (!oracle_.check_disclosure(policy_, probe_terms).disclosing) {
          std::string before = old_loc.fetch(old_ref.handle);
          old_loc.replace_entry(old_ref.handle, old_ref.offset, new_text);
          undo.push_back([&old_loc, h = old_ref.handle, before] {
            old_loc.overwrite(h, before);
          });
          ChunkEntry& en = old_chunk->entries[old_ref.offset];
          en.surface = new_text;
          en.normalized = replacement.normalized;
          old_chunk->disclosure_score = chunk_disclosure_score(
              old_chunk->term_set(), policy_, oracle_);
          touched.insert(old_chunk->chunk_id);
          // Same offset, same chunk: cloc and D' stay put.
        } else {
          tombstone_old();
          std::set<std::string> avoid;
          for (std::size_t j = 0; j < meta.sort_list_cloc.size(); ++j) {
            if (j != o) avoid.insert(meta.sort_list_cloc[j].location_id);
          }
          avoid.insert(meta.doc_cloc.first);
          meta.sort_list_cloc[o] = allocate_qid(o, avoid);
          // D' keeps its quasi-identifier sentinel.
        }
      } else {  // demoted to plain
        tombstone_old();
        meta.sort_list_cloc.erase(meta.sort_list_cloc.begin() +
                                  static_cast<std::ptrdiff_t>(o));
        shift_doc_qids(staged, doc_id, o + 1, -1);
        new_dprime = splice(new_dprime, span->dprime_begin, span->dprime_end,
                            new_text);
      }
    }

    if (new_dprime != rec.dprime) {
      Location& dloc = pool_.at(meta.doc_cloc.first);
      std::string before = rec.dprime;
      dloc.overwrite(meta.doc_cloc.second, new_dprime);
      undo.push_back([&dloc, h = meta.doc_cloc.second, before] {
        dloc.overwrite(h, before);
      });
    }
    assert_chunks_safe(staged, touched);
    chunks_ = std::move(staged);
    metadata_[doc_id] = std::move(meta);
  } catch (...) {
    run_rollback(undo);
    throw;
  }
}

void Proxy::insert_term(const std::string& doc_id, std::size_t position,
                        const std::string& new_text) {
  std::unique_lock lock(mutex_);
  const DocMetadata& current = require_doc(doc_id);
  if (current.policy_fingerprint != policy_.fingerprint()) {
    fail(ErrorCode::config_error,
         "document was outsourced under a different policy");
  }
  UpdateText inserted = validate_update_text(
      new_text, options_.sentinels, tokenizer_, "the inserted term");

  Reconstruction rec = reconstruct(current);
  TermSequence seq = extract_terms(rec.original, tokenizer_);
  std::vector<std::size_t> content_idx;
  for (std::size_t i = 0; i < seq.tokens.size(); ++i) {
    if (seq.tokens[i].is_content) content_idx.push_back(i);
  }
  if (position > content_idx.size()) {
    fail(ErrorCode::invalid_position,
         "position " + std::to_string(position) + " is out of range (" +
             std::to_string(content_idx.size()) + " content terms)");
  }
  bool append = position == content_idx.size();
  std::size_t b =
      append ? rec.original.size() : seq.tokens[content_idx[position]].begin;
  std::size_t dpoint = append ? rec.dprime.size() : orig_to_dprime(rec, b);

  auto covered = [&](const Token& t) {
    for (const RiskySpan& s : rec.spans) {
      if (s.orig_begin <= t.begin && t.end <= s.orig_end) return true;
    }
    return false;
  };
  std::set<std::string> visible;
  for (std::size_t ci : content_idx) {
    const Token& t = seq.tokens[ci];
    if (!covered(t)) visible.insert(t.normalized);
  }
  TermClass cls = inserted.token.is_content
                      ? classify_new_term(inserted.normalized, visible)
                      : TermClass::plain;

  ChunkSet staged = chunks_;
  DocMetadata meta = current;
  std::vector<std::function<void()>> undo;
  std::set<std::uint64_t> touched;

  auto count_before = [&](bool qid) {
    std::size_t n = 0;
    for (const RiskySpan& s : rec.spans) {
      if (s.is_qid == qid && s.orig_begin < b) ++n;
    }
    return n;
  };
  auto shaped = [&](const std::string& core) {
    if (append) return rec.original.empty() ? core : " " + core;
    return core + " ";
  };

  try {
    std::string piece;
    if (cls == TermClass::identifier) {
      std::size_t at = count_before(false);
      meta.sort_list_ids.insert(
          meta.sort_list_ids.begin() + static_cast<std::ptrdiff_t>(at),
          new_text);
      piece = shaped(options_.sentinels.id);
    } else if (cls == TermClass::quasi) {
      std::size_t at = count_before(true);
      shift_doc_qids(staged, doc_id, at, +1);

      ChunkEntry e;
      e.surface = new_text;
      e.normalized = inserted.normalized;
      e.doc_id = doc_id;
      e.sentinel_index = at;
      std::set<std::string> avoid = locations_used_by(meta, staged);
      auto [chunk, offset] =
          allocate_update_entry(std::move(e), policy_, oracle_, staged, avoid);
      if (!chunk->location_id) {
        chunk->location_id = least_loaded_location(pool_, avoid);
      }
      Location& loc = pool_.at(*chunk->location_id);
      if (!chunk->handle) {
        std::vector<std::string> stored;
        for (const ChunkEntry& en : chunk->entries) {
          stored.push_back(en.tombstone ? kTombstoneEntry : en.surface);
        }
        std::string h = loc.store(join_entries(stored));
        chunk->handle = h;
        undo.push_back([&loc, h] { loc.remove(h); });
      } else {
        std::string before = loc.fetch(*chunk->handle);
        std::size_t off = loc.append_entry(*chunk->handle, new_text);
        undo.push_back(
            [&loc, h = *chunk->handle, before] { loc.overwrite(h, before); });
        if (off != offset) {
          fail(ErrorCode::internal_error,
               "stored chunk offsets diverged from the plan");
        }
      }
      touched.insert(chunk->chunk_id);
      meta.sort_list_cloc.insert(
          meta.sort_list_cloc.begin() + static_cast<std::ptrdiff_t>(at),
          ClocRef{*chunk->location_id, *chunk->handle, offset});
      piece = shaped(options_.sentinels.qid);
    } else {
      piece = shaped(new_text);
    }

    std::string new_dprime = splice(rec.dprime, dpoint, dpoint, piece);
    Location& dloc = pool_.at(meta.doc_cloc.first);
    std::string before = rec.dprime;
    dloc.overwrite(meta.doc_cloc.second, new_dprime);
    undo.push_back([&dloc, h = meta.doc_cloc.second, before] {
      dloc.overwrite(h, before);
    });

    assert_chunks_safe(staged, touched);
    chunks_ = std::move(staged);
    metadata_[doc_id] = std::move(meta);
  } catch (...) {
    run_rollback(undo);
    throw;
  }
}

// -------------------------------------------------------- persistence ----

void Proxy::persist_metadata(const std::filesystem::path& store_path) const {
  std::shared_lock lock(mutex_);
  std::ofstream out(store_path, std::ios::binary | std::ios::trunc);
  if (!out) {
    fail(ErrorCode::io_failure,
         "cannot open metadata store for writing: " + store_path.string());
  }
  out << json{{"schema", kMetadataSchema}}.dump() << '\n';
  for (const auto& [doc_id, meta] : metadata_) {
    json cloc = json::array();
    for (const ClocRef& ref : meta.sort_list_cloc) {
      cloc.push_back(json::array({ref.location_id, ref.handle, ref.offset}));
    }
    json j{{"doc_id", meta.doc_id},
           {"user_id", meta.user_id},
           {"sort_list_ids", meta.sort_list_ids},
           {"sort_list_cloc", std::move(cloc)},
           {"doc_cloc",
            json::array({meta.doc_cloc.first, meta.doc_cloc.second})},
           {"policy_fingerprint", meta.policy_fingerprint}};
    out << j.dump() << '\n';
  }
  out.flush();
  if (!out) {
    fail(ErrorCode::io_failure,
         "failed writing metadata store: " + store_path.string());
  }
}

void Proxy::load_metadata(const std::filesystem::path& store_path) {
  std::unique_lock lock(mutex_);
  std::ifstream in(store_path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::io_failure,
         "cannot open metadata store: " + store_path.string());
  }
  std::string line;
  if (!std::getline(in, line)) {
    fail(ErrorCode::schema_version_mismatch,
         "metadata store has no schema header");
  }
  json header = json::parse(line, nullptr, false);
  if (header.is_discarded() || !header.is_object() ||
      !header.contains("schema") || !header["schema"].is_string() ||
      header["schema"].get<std::string>() != kMetadataSchema) {
    fail(ErrorCode::schema_version_mismatch,
         std::string("metadata store does not declare schema ") +
             kMetadataSchema);
  }

  std::map<std::string, DocMetadata> loaded;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      fail(ErrorCode::metadata_corrupt,
           "metadata line " + std::to_string(line_no) +
               " is not a JSON object");
    }
    DocMetadata meta;
    try {
      meta.doc_id = j.at("doc_id").get<std::string>();
      meta.user_id = j.at("user_id").get<std::string>();
      for (const auto& s : j.at("sort_list_ids")) {
        meta.sort_list_ids.push_back(s.get<std::string>());
      }
      for (const auto& triple : j.at("sort_list_cloc")) {
        if (!triple.is_array() || triple.size() != 3) {
          fail(ErrorCode::metadata_corrupt,
               "metadata line " + std::to_string(line_no) +
                   " has a malformed chunk reference");
        }
        ClocRef ref;
        ref.location_id = triple[0].get<std::string>();
        ref.handle = triple[1].get<std::string>();
        ref.offset = triple[2].get<std::size_t>();
        meta.sort_list_cloc.push_back(std::move(ref));
      }
      const auto& dc = j.at("doc_cloc");
      if (!dc.is_array() || dc.size() != 2) {
        fail(ErrorCode::metadata_corrupt,
             "metadata line " + std::to_string(line_no) +
                 " has a malformed document reference");
      }
      meta.doc_cloc = {dc[0].get<std::string>(), dc[1].get<std::string>()};
      meta.policy_fingerprint = j.at("policy_fingerprint").get<std::string>();
    } catch (const json::exception& e) {
      fail(ErrorCode::metadata_corrupt,
           "metadata line " + std::to_string(line_no) + ": " + e.what());
    }
    if (meta.doc_id.empty()) {
      fail(ErrorCode::metadata_corrupt,
           "metadata line " + std::to_string(line_no) + " has no doc_id");
    }
    if (loaded.count(meta.doc_id)) {
      fail(ErrorCode::metadata_corrupt,
           "duplicate metadata record for " + meta.doc_id);
    }
    // Per-document location distinctness: every stored item of a document
    // sits at its own location.
    std::map<std::string, std::set<std::string>> handles_by_location;
    handles_by_location[meta.doc_cloc.first].insert(meta.doc_cloc.second);
    for (const ClocRef& ref : meta.sort_list_cloc) {
      handles_by_location[ref.location_id].insert(ref.handle);
    }
    for (const auto& [location_id, handles] : handles_by_location) {
      if (handles.size() > 1) {
        fail(ErrorCode::metadata_corrupt,
             meta.doc_id + " stores more than one item at " + location_id);
      }
    }
    loaded.emplace(meta.doc_id, std::move(meta));
  }

  std::map<std::string, DocMetadata> previous = std::move(metadata_);
  metadata_ = std::move(loaded);
  try {
    rebuild_chunks();
  } catch (...) {
    metadata_ = std::move(previous);
    throw;
  }
}

void Proxy::rebuild_chunks() {
  ChunkSet rebuilt;
  std::set<std::pair<std::string, std::string>> refs;
  for (const auto& [doc_id, meta] : metadata_) {
    for (const ClocRef& ref : meta.sort_list_cloc) {
      refs.insert({ref.location_id, ref.handle});
    }
  }
  auto items = fetch_items(refs);

  std::map<std::pair<std::string, std::string>, Chunk*> by_ref;
  for (const auto& [key, payload] : items) {
    Chunk& chunk = rebuilt.create_chunk();
    chunk.location_id = key.first;
    chunk.handle = key.second;
    for (const std::string& e : payload_entries(payload)) {
      ChunkEntry entry;
      if (e == kTombstoneEntry) {
        entry.tombstone = true;
      } else {
        entry.surface = e;
        try {
          entry.normalized = normalize_text(e);
        } catch (const Error&) {
          fail(ErrorCode::metadata_corrupt,
               "stored chunk payload is not valid text");
        }
      }
      chunk.entries.push_back(std::move(entry));
    }
    by_ref[key] = &chunk;
  }

  std::set<std::tuple<std::string, std::string, std::size_t>> seen;
  for (const auto& [doc_id, meta] : metadata_) {
    for (std::size_t k = 0; k < meta.sort_list_cloc.size(); ++k) {
      const ClocRef& ref = meta.sort_list_cloc[k];
      if (!seen.insert({ref.location_id, ref.handle, ref.offset}).second) {
        fail(ErrorCode::metadata_corrupt,
             "metadata references the same chunk entry twice");
      }
      Chunk* chunk = by_ref.at({ref.location_id, ref.handle});
      if (ref.offset >= chunk->entries.size()) {
        fail(ErrorCode::metadata_corrupt,
             "chunk offset " + std::to_string(ref.offset) +
                 " is outside the stored payload");
      }
      ChunkEntry& entry = chunk->entries[ref.offset];
      if (entry.tombstone) {
        fail(ErrorCode::metadata_corrupt,
             "metadata references a deleted chunk entry");
      }
      entry.doc_id = doc_id;
      entry.sentinel_index = k;
    }
  }
  for (Chunk& chunk : rebuilt.chunks()) {
    chunk.disclosure_score =
        chunk_disclosure_score(chunk.term_set(), policy_, oracle_);
  }
  chunks_ = std::move(rebuilt);
}

// -------------------------------------------------------------- status ----

StatusReport Proxy::status() const {
  std::shared_lock lock(mutex_);
  StatusReport report;
  report.document_count = metadata_.size();
  for (const Location& loc : pool_.locations()) {
    report.locations.push_back({loc.location_id(), loc.item_count()});
  }
  for (const Chunk& chunk : chunks_.chunks()) {
    ChunkStatus cs;
    cs.chunk_id = chunk.chunk_id;
    cs.location_id = chunk.location_id ? *chunk.location_id : "";
    for (const ChunkEntry& e : chunk.entries) {
      if (e.tombstone) {
        ++cs.tombstones;
      } else {
        ++cs.live_entries;
      }
    }
    cs.disclosure_score = chunk.disclosure_score;
    report.chunks.push_back(cs);
  }
  return report;
}

}  // namespace semsplit
