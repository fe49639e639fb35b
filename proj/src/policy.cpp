#include "semsplit/policy.hpp"

#include <cstdint>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "semsplit/errors.hpp"
#include "semsplit/text.hpp"

namespace semsplit {

namespace {

// FNV-1a, enough to detect that a doc was outsourced under another policy.
std::string fnv1a_hex(const std::string& data) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ull;
  }
  std::ostringstream out;
  out << std::hex << h;
  return out.str();
}

}  // namespace

std::string PrivacyPolicy::fingerprint() const {
  std::string blob;
  for (const PolicyEntry& e : entries) {
    blob += e.entity;
    blob += '\x1f';
    for (const std::string& a : e.aliases) {
      blob += a;
      blob += '\x1e';
    }
    blob += '\x1f';
    blob += e.generalization.value_or("");
    blob += '\x1f';
    if (e.ic_override) blob += std::to_string(*e.ic_override);
    blob += '\x1d';
  }
  return fnv1a_hex(blob);
}

PrivacyPolicy parse_policy_json(const std::string& json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::config_error, std::string("policy JSON: ") + e.what());
  }
  if (!doc.is_array() || doc.empty()) {
    fail(ErrorCode::config_error, "policy must be a non-empty JSON array");
  }

  PrivacyPolicy policy;
  for (const auto& item : doc) {
    if (!item.is_object() || !item.contains("entity")) {
      fail(ErrorCode::config_error, "policy entry missing 'entity'");
    }
    PolicyEntry entry;
    entry.entity = normalize_text(item.at("entity").get<std::string>());
    if (entry.entity.empty()) {
      fail(ErrorCode::config_error, "policy entity is empty");
    }
    if (item.contains("aliases")) {
      for (const auto& a : item.at("aliases")) {
        std::string norm = normalize_text(a.get<std::string>());
        if (!norm.empty()) entry.aliases.push_back(norm);
      }
    }
    if (item.contains("generalization") &&
        !item.at("generalization").is_null()) {
      entry.generalization =
          normalize_text(item.at("generalization").get<std::string>());
    }
    if (item.contains("ic_override") && !item.at("ic_override").is_null()) {
      double v = item.at("ic_override").get<double>();
      if (!(v > 0.0)) {
        fail(ErrorCode::config_error, "ic_override must be positive");
      }
      entry.ic_override = v;
    }
    entry.label = item.value("label", entry.entity);
    policy.entries.push_back(std::move(entry));
  }
  return policy;
}

PrivacyPolicy load_policy_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, "cannot open policy file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_policy_json(buf.str());
}

}  // namespace semsplit
