#pragma once

#include <optional>
#include <string>
#include <vector>

namespace semsplit {

// One protected entity: the term itself, optional aliases that disclose it
// outright, an optional generalization acting as the disclosure ceiling,
// and an optional explicit informativeness for entities absent from the
// corpus.
struct PolicyEntry {
  std::string entity;                      // normalized
  std::vector<std::string> aliases;        // normalized
  std::optional<std::string> generalization;  // normalized
  std::optional<double> ic_override;       // bits
  std::string label;                       // display name for reports
};

struct PrivacyPolicy {
  std::vector<PolicyEntry> entries;

  bool empty() const { return entries.empty(); }
  // Stable content hash, recorded in per-document metadata.
  std::string fingerprint() const;
};

// JSON array of {entity, aliases?, generalization?, ic_override?, label?}.
PrivacyPolicy load_policy_file(const std::string& path);
PrivacyPolicy parse_policy_json(const std::string& json_text);

}  // namespace semsplit
