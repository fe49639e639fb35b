#pragma once

// Independent re-implementation of the probability / disclosure math, used
// to cross-check the production oracle.  Deliberately different machinery:
// documents are split on single spaces (callers feed pre-normalized text),
// postings are std::set, joint counts use std::set_intersection, and no
// caching exists anywhere.

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace refimpl {

struct Entity {
  std::string entity;
  std::vector<std::string> aliases;
  std::optional<std::string> generalization;
  std::optional<double> ic_override;
};

struct Verdict {
  bool disclosing = false;
  std::optional<std::size_t> entity_index;
  double pmi = -std::numeric_limits<double>::infinity();
  double threshold = 0.0;
};

class Oracle {
 public:
  explicit Oracle(const std::vector<std::string>& docs) : n_(docs.size()) {
    for (std::size_t d = 0; d < docs.size(); ++d) {
      for (const std::string& w : split(docs[d])) {
        postings_[w].insert(d);
      }
    }
  }

  std::size_t total_docs() const { return n_; }

  std::size_t count(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? 0 : it->second.size();
  }

  std::size_t joint(const std::vector<std::string>& terms) const {
    if (terms.empty()) return n_;
    std::set<std::size_t> acc = docs_of(terms[0]);
    for (std::size_t i = 1; i < terms.size(); ++i) {
      std::set<std::size_t> other = docs_of(terms[i]);
      std::set<std::size_t> out;
      std::set_intersection(acc.begin(), acc.end(), other.begin(),
                            other.end(), std::inserter(out, out.begin()));
      acc = std::move(out);
    }
    return acc.size();
  }

  double ic(const std::string& term) const {
    std::size_t c = count(term);
    if (c == 0) c = 1;
    return -std::log2(static_cast<double>(c) / static_cast<double>(n_));
  }

  double entity_ic(const Entity& e) const {
    if (e.ic_override) return *e.ic_override;
    return ic(e.entity);
  }

  double threshold(const Entity& e) const {
    if (e.generalization) return ic(*e.generalization);
    return entity_ic(e);
  }

  // -inf when the joint count is zero.
  double pmi(const std::string& entity,
             const std::vector<std::string>& terms) const {
    std::vector<std::string> all = terms;
    if (std::find(all.begin(), all.end(), entity) == all.end()) {
      all.push_back(entity);
    }
    std::size_t j = joint(all);
    if (j == 0) return -std::numeric_limits<double>::infinity();
    double pj = static_cast<double>(j) / static_cast<double>(n_);
    double pc = static_cast<double>(count(entity)) / static_cast<double>(n_);
    double pt = static_cast<double>(joint(terms)) / static_cast<double>(n_);
    return std::log2(pj / (pc * pt));
  }

  Verdict check(const std::vector<Entity>& policy,
                const std::vector<std::string>& terms,
                double eps = 1e-9) const {
    Verdict v;
    bool seeded = false;
    for (std::size_t k = 0; k < policy.size(); ++k) {
      const Entity& e = policy[k];
      double th = threshold(e);
      bool exact = false;
      for (const std::string& t : terms) {
        if (t == e.entity) exact = true;
        for (const std::string& a : e.aliases) {
          if (t == a) exact = true;
        }
      }
      if (exact) {
        v.disclosing = true;
        v.entity_index = k;
        v.pmi = std::max(entity_ic(e), th);
        v.threshold = th;
        return v;
      }
      double value = (count(e.entity) == 0)
                         ? -std::numeric_limits<double>::infinity()
                         : pmi(e.entity, terms);
      if (value >= th - eps) {
        v.disclosing = true;
        v.entity_index = k;
        v.pmi = value;
        v.threshold = th;
        return v;
      }
      if (!seeded || value > v.pmi) {
        seeded = true;
        v.pmi = value;
        v.threshold = th;
      }
    }
    return v;
  }

 private:
  static std::vector<std::string> split(const std::string& doc) {
    std::vector<std::string> words;
    std::string cur;
    for (char ch : doc) {
      if (ch == ' ') {
        if (!cur.empty()) words.push_back(cur);
        cur.clear();
      } else {
        cur += ch;
      }
    }
    if (!cur.empty()) words.push_back(cur);
    return words;
  }

  std::set<std::size_t> docs_of(const std::string& term) const {
    auto it = postings_.find(term);
    return it == postings_.end() ? std::set<std::size_t>{} : it->second;
  }

  std::size_t n_;
  std::map<std::string, std::set<std::size_t>> postings_;
};

}  // namespace refimpl
