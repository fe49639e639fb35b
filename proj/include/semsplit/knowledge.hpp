#pragma once

#include <cstdint>
#include <limits>
#include <mutex>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "semsplit/corpus.hpp"
#include "semsplit/policy.hpp"

namespace semsplit {

// Comparison slack, in bits, for "co-occurrence information reaches the
// threshold" checks.
inline constexpr double kDefaultEpsilonBits = 1e-9;

// Returned by pmi() when the joint count is zero: the corpus offers no
// evidence linking the entity to the term set.  Never disclosing.
inline constexpr double kNoCorrelation =
    -std::numeric_limits<double>::infinity();

struct DisclosureVerdict {
  bool disclosing = false;
  // Index into the policy entry list; set iff disclosing.
  std::optional<std::size_t> triggering_entity;
  double pmi_value = kNoCorrelation;  // bits
  double threshold = 0.0;             // bits
};

// Probability/information oracle over an immutable CorpusIndex.
//
// All logs are base 2 (bits).  Marginal counts of zero for ordinary terms
// are floored to 1; a zero joint count is reported as kNoCorrelation.
// Policy entities get no floor: they must either occur in the corpus or
// carry an ic_override.
class KnowledgeOracle {
 public:
  explicit KnowledgeOracle(const CorpusIndex& index,
                           double epsilon_bits = kDefaultEpsilonBits);

  uint64_t total_docs() const { return index_->total_docs(); }
  double epsilon() const { return epsilon_; }

  // Documents containing every term of `terms` (raw, no floor).
  uint64_t joint_count(const std::vector<std::string>& terms) const;

  // joint_count / total_docs.
  double probability(const std::vector<std::string>& terms) const;

  // -log2 p(term) with the zero-count floor: an unseen term counts as if it
  // occurred in exactly one document.
  double information_content(const std::string& term) const;

  // Information content anchoring the entity: ic_override when declared,
  // otherwise corpus-derived.  Throws UnknownEntity when neither resolves.
  double entity_ic(const PolicyEntry& entry) const;

  // Disclosure threshold for the entity: IC of its generalization when one
  // is declared, otherwise entity_ic.
  double entity_threshold(const PolicyEntry& entry) const;

  // log2( p(entity, T) / (p(entity) * p(T)) ) in bits.  Returns
  // kNoCorrelation when the joint count is zero.  Throws UnknownEntity when
  // the entity has zero corpus count.
  double pmi(const std::string& entity,
             const std::vector<std::string>& terms) const;

  // Same, but an entry with ic_override is resolvable even at zero corpus
  // count (its joint count is then necessarily zero -> kNoCorrelation).
  double pmi(const PolicyEntry& entry,
             const std::vector<std::string>& terms) const;

  // True iff some member of `terms` string-equals the entry's entity or one
  // of its aliases (all normalized).
  static bool exact_match(const PolicyEntry& entry,
                          const std::vector<std::string>& terms);

  // First entity in policy order whose threshold the term set reaches,
  // either by exact match or by co-occurrence information.  When nothing
  // triggers, pmi_value/threshold report the highest co-occurrence seen.
  DisclosureVerdict check_disclosure(const PrivacyPolicy& policy,
                                     const std::vector<std::string>& terms) const;

  // Rejects unresolvable entities (UnknownEntity) and entities whose
  // threshold is not strictly positive (ConfigError).  Call once before
  // using a policy for detection or splitting.
  void validate_policy(const PrivacyPolicy& policy) const;

  // The cache only memoizes joint counts; enabling or disabling it never
  // changes a returned value.
  void set_cache_enabled(bool enabled);
  bool cache_enabled() const;

 private:
  uint64_t raw_joint(const std::vector<std::string>& terms) const;

  const CorpusIndex* index_;
  double epsilon_;

  mutable std::mutex cache_mutex_;
  mutable std::unordered_map<std::string, uint64_t> joint_cache_;
  bool cache_enabled_ = true;
};

}  // namespace semsplit
