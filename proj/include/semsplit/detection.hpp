#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "semsplit/knowledge.hpp"
#include "semsplit/policy.hpp"
#include "semsplit/text.hpp"

namespace semsplit {

enum class RiskKind { identifier, quasi_identifier_set };

// A term set that was found to reach a policy entity's threshold.  Terms
// are distinct normalized forms; token_indices lists every occurrence of
// any member inside the source document.
struct RiskySet {
  std::vector<std::string> terms;          // lexicographically sorted
  std::vector<std::size_t> token_indices;  // ascending, all occurrences
  RiskKind kind = RiskKind::identifier;
  DisclosureVerdict verdict;               // as evaluated at detection time

  std::size_t cardinality() const { return terms.size(); }
};

struct DetectionConfig {
  std::size_t max_cardinality = 3;
  // Upper bound on the number of size-n combinations a single cardinality
  // stage may enumerate; beyond it detection refuses to run.
  std::size_t combination_budget = 5000;
};

// Called once per combination actually evaluated, in evaluation order.
using DetectionObserver = std::function<void(
    const std::vector<std::string>& combination,
    const DisclosureVerdict& verdict)>;

// All size-n subsets of the eligible distinct content terms, ordered by
// descending sum of member ICs, ties broken lexicographically on the
// sorted term vectors.  Throws CombinationBudgetExceeded when the stage
// would exceed `budget` combinations.
class CombinationStream {
 public:
  CombinationStream(const std::vector<std::string>& eligible_terms,
                    std::size_t n, const KnowledgeOracle& oracle,
                    std::size_t budget);

  // Next combination, or nullopt when exhausted.
  std::optional<std::vector<std::string>> next();
  std::size_t size() const { return combos_.size(); }

 private:
  std::vector<std::vector<std::string>> combos_;
  std::size_t pos_ = 0;
};

// Convenience wrapper matching the document-level contract: eligible terms
// are doc's distinct content terms minus `excluded`.
CombinationStream create_combinations(const TermSequence& doc, std::size_t n,
                                      const std::set<std::string>& excluded,
                                      const KnowledgeOracle& oracle,
                                      std::size_t budget = 5000);

// Stage-wise detection: for n = 1..max_cardinality evaluate combinations in
// informativeness order; a disclosing combination becomes a RiskySet and
// its members leave the pool and all pending combinations.  Returned sets
// are pairwise disjoint and listed in detection order.
std::vector<RiskySet> detect_risky_terms(
    const TermSequence& doc, const PrivacyPolicy& policy,
    const KnowledgeOracle& oracle, const DetectionConfig& config = {},
    const DetectionObserver& observer = nullptr);

}  // namespace semsplit
