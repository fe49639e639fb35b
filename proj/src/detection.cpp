#include "semsplit/detection.hpp"

#include <algorithm>

#include "semsplit/errors.hpp"

namespace semsplit {

namespace {

// C(m, n) capped at `cap` + 1 to avoid overflow.
std::size_t combination_count(std::size_t m, std::size_t n, std::size_t cap) {
  if (n > m) return 0;
  n = std::min(n, m - n);
  std::size_t result = 1;
  for (std::size_t i = 1; i <= n; ++i) {
    // result * (m - n + i) / i is always integral at this point.
    double projected = static_cast<double>(result) *
                       static_cast<double>(m - n + i) /
                       static_cast<double>(i);
    if (projected > static_cast<double>(cap)) return cap + 1;
    result = result * (m - n + i) / i;
  }
  return result;
}

}  // namespace

CombinationStream::CombinationStream(
    const std::vector<std::string>& eligible_terms, std::size_t n,
    const KnowledgeOracle& oracle, std::size_t budget) {
  if (n == 0) {
    fail(ErrorCode::config_error, "combination cardinality must be >= 1");
  }
  std::size_t m = eligible_terms.size();
  if (m < n) return;  // empty stream

  std::size_t total = combination_count(m, n, budget);
  if (total > budget) {
    fail(ErrorCode::combination_budget_exceeded,
         "cardinality " + std::to_string(n) + " over " + std::to_string(m) +
             " terms exceeds the combination budget of " +
             std::to_string(budget));
  }

  std::vector<std::string> terms = eligible_terms;
  std::sort(terms.begin(), terms.end());
  terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
  m = terms.size();
  if (m < n) return;

  std::vector<double> ic(m);
  for (std::size_t i = 0; i < m; ++i) {
    ic[i] = oracle.information_content(terms[i]);
  }

  // Enumerate index combinations, then sort by (-sum IC, lexicographic).
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  std::vector<std::pair<double, std::vector<std::string>>> scored;
  while (true) {
    double sum = 0.0;
    std::vector<std::string> combo(n);
    for (std::size_t i = 0; i < n; ++i) {
      combo[i] = terms[idx[i]];
      sum += ic[idx[i]];
    }
    scored.emplace_back(sum, std::move(combo));  // combo already lex-sorted

    // Advance to the next index combination.
    std::size_t j = n;
    while (j > 0 && idx[j - 1] == m - n + (j - 1)) --j;
    if (j == 0) break;
    ++idx[j - 1];
    for (std::size_t k = j; k < n; ++k) idx[k] = idx[k - 1] + 1;
  }

  std::sort(scored.begin(), scored.end(),
            [](const auto& a, const auto& b) {
              if (a.first != b.first) return a.first > b.first;
              return a.second < b.second;
            });
  combos_.reserve(scored.size());
  for (auto& [_, combo] : scored) combos_.push_back(std::move(combo));
}

std::optional<std::vector<std::string>> CombinationStream::next() {
  if (pos_ >= combos_.size()) return std::nullopt;
  return combos_[pos_++];
}

CombinationStream create_combinations(const TermSequence& doc, std::size_t n,
                                      const std::set<std::string>& excluded,
                                      const KnowledgeOracle& oracle,
                                      std::size_t budget) {
  std::vector<std::string> eligible;
  for (const std::string& term : doc.distinct_content_terms()) {
    if (excluded.find(term) == excluded.end()) eligible.push_back(term);
  }
  return CombinationStream(eligible, n, oracle, budget);
}

std::vector<RiskySet> detect_risky_terms(const TermSequence& doc,
                                         const PrivacyPolicy& policy,
                                         const KnowledgeOracle& oracle,
                                         const DetectionConfig& config,
                                         const DetectionObserver& observer) {
  std::vector<RiskySet> result;
  std::set<std::string> removed;

  for (std::size_t n = 1; n <= config.max_cardinality; ++n) {
    CombinationStream stream = create_combinations(
        doc, n, removed, oracle, config.combination_budget);
    while (auto combo = stream.next()) {
      // A combination may contain terms claimed by a set found earlier in
      // this same stage; those were removed from the pending combinations.
      bool stale = std::any_of(combo->begin(), combo->end(),
                               [&removed](const std::string& t) {
                                 return removed.count(t) != 0;
                               });
      if (stale) continue;

      DisclosureVerdict verdict = oracle.check_disclosure(policy, *combo);
      if (observer) observer(*combo, verdict);
      if (!verdict.disclosing) continue;

      RiskySet risky;
      risky.terms = *combo;
      risky.kind = (n == 1) ? RiskKind::identifier
                            : RiskKind::quasi_identifier_set;
      risky.verdict = verdict;
      for (const std::string& term : *combo) {
        removed.insert(term);
        for (std::size_t tok : doc.occurrences_of(term)) {
          risky.token_indices.push_back(tok);
        }
      }
      std::sort(risky.token_indices.begin(), risky.token_indices.end());
      result.push_back(std::move(risky));
    }
  }
  return result;
}

}  // namespace semsplit
