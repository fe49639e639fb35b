#include "semsplit/knowledge.hpp"

#include <algorithm>
#include <cmath>

#include "semsplit/errors.hpp"

namespace semsplit {

namespace {

// Canonical cache key: sorted, deduplicated terms joined on a separator that
// cannot appear inside a normalized term.
std::string cache_key(std::vector<std::string> terms) {
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  std::string key;
  for (const std::string& t : terms) {
    key += t;
    key += '\x1f';
  }
  return key;
}

std::vector<std::string> with_entity(const std::string& entity,
                                     const std::vector<std::string>& terms) {
  std::vector<std::string> all;
  all.reserve(terms.size() + 1);
  all.push_back(entity);
  for (const std::string& t : terms) {
    if (t != entity) all.push_back(t);
  }
  return all;
}

}  // namespace

KnowledgeOracle::KnowledgeOracle(const CorpusIndex& index, double epsilon_bits)
    : index_(&index), epsilon_(epsilon_bits) {
  if (!(epsilon_ >= 0.0)) {
    fail(ErrorCode::config_error, "epsilon must be >= 0");
  }
}

uint64_t KnowledgeOracle::raw_joint(
    const std::vector<std::string>& terms) const {
  return index_->joint_doc_count(terms);
}

uint64_t KnowledgeOracle::joint_count(
    const std::vector<std::string>& terms) const {
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_enabled_) {
      auto it = joint_cache_.find(cache_key(terms));
      if (it != joint_cache_.end()) return it->second;
    }
  }
  uint64_t count = raw_joint(terms);
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    if (cache_enabled_) joint_cache_.emplace(cache_key(terms), count);
  }
  return count;
}

double KnowledgeOracle::probability(
    const std::vector<std::string>& terms) const {
  return static_cast<double>(joint_count(terms)) /
         static_cast<double>(index_->total_docs());
}

double KnowledgeOracle::information_content(const std::string& term) const {
  uint64_t count = index_->doc_count(term);
  if (count == 0) count = 1;  // unseen terms are maximally informative
  return std::log2(static_cast<double>(index_->total_docs())) -
         std::log2(static_cast<double>(count));
}

double KnowledgeOracle::entity_ic(const PolicyEntry& entry) const {
  if (entry.ic_override.has_value()) return *entry.ic_override;
  if (index_->doc_count(entry.entity) == 0) {
    fail(ErrorCode::unknown_entity,
         "entity '" + entry.entity +
             "' has no corpus occurrences and no ic_override");
  }
  return information_content(entry.entity);
}

double KnowledgeOracle::entity_threshold(const PolicyEntry& entry) const {
  if (entry.generalization.has_value()) {
    return information_content(*entry.generalization);
  }
  return entity_ic(entry);
}

double KnowledgeOracle::pmi(const std::string& entity,
                            const std::vector<std::string>& terms) const {
  uint64_t c_count = index_->doc_count(entity);
  if (c_count == 0) {
    fail(ErrorCode::unknown_entity,
         "entity '" + entity + "' has no corpus occurrences");
  }
  uint64_t joint = joint_count(with_entity(entity, terms));
  if (joint == 0) return kNoCorrelation;
  uint64_t t_joint = joint_count(terms);
  // joint > 0 implies t_joint > 0.
  double n = static_cast<double>(index_->total_docs());
  return std::log2(static_cast<double>(joint) * n /
                   (static_cast<double>(c_count) *
                    static_cast<double>(t_joint)));
}

double KnowledgeOracle::pmi(const PolicyEntry& entry,
                            const std::vector<std::string>& terms) const {
  if (index_->doc_count(entry.entity) == 0) {
    if (!entry.ic_override.has_value()) {
      fail(ErrorCode::unknown_entity,
           "entity '" + entry.entity +
               "' has no corpus occurrences and no ic_override");
    }
    return kNoCorrelation;  // zero count forces a zero joint count
  }
  return pmi(entry.entity, terms);
}

bool KnowledgeOracle::exact_match(const PolicyEntry& entry,
                                  const std::vector<std::string>& terms) {
  for (const std::string& t : terms) {
    if (t == entry.entity) return true;
    for (const std::string& alias : entry.aliases) {
      if (t == alias) return true;
    }
  }
  return false;
}

DisclosureVerdict KnowledgeOracle::check_disclosure(
    const PrivacyPolicy& policy, const std::vector<std::string>& terms) const {
  DisclosureVerdict verdict;
  bool any = false;
  for (std::size_t k = 0; k < policy.entries.size(); ++k) {
    const PolicyEntry& entry = policy.entries[k];
    double threshold = entity_threshold(entry);
    if (exact_match(entry, terms)) {
      verdict.disclosing = true;
      verdict.triggering_entity = k;
      verdict.pmi_value = std::max(entity_ic(entry), threshold);
      verdict.threshold = threshold;
      return verdict;
    }
    double value = pmi(entry, terms);
    if (value >= threshold - epsilon_) {
      verdict.disclosing = true;
      verdict.triggering_entity = k;
      verdict.pmi_value = value;
      verdict.threshold = threshold;
      return verdict;
    }
    if (!any || value > verdict.pmi_value) {
      any = true;
      verdict.pmi_value = value;
      verdict.threshold = threshold;
    }
  }
  return verdict;
}

void KnowledgeOracle::validate_policy(const PrivacyPolicy& policy) const {
  if (policy.empty()) {
    fail(ErrorCode::config_error, "policy has no entries");
  }
  for (const PolicyEntry& entry : policy.entries) {
    entity_ic(entry);  // throws UnknownEntity when unresolvable
    double threshold = entity_threshold(entry);
    if (!(threshold > 0.0)) {
      fail(ErrorCode::config_error,
           "entity '" + entry.entity +
               "' has a non-positive disclosure threshold; its "
               "generalization occurs in every corpus document");
    }
  }
}

void KnowledgeOracle::set_cache_enabled(bool enabled) {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_enabled_ = enabled;
  if (!enabled) joint_cache_.clear();
}

bool KnowledgeOracle::cache_enabled() const {
  std::lock_guard<std::mutex> lock(cache_mutex_);
  return cache_enabled_;
}

}  // namespace semsplit
