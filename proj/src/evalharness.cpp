#include "semsplit/evalharness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <future>
#include <set>
#include <sstream>
#include <thread>
#include <utility>

#include "json.hpp"
#include "semsplit/errors.hpp"
#include "semsplit/proxy.hpp"
#include "semsplit/storage.hpp"

namespace semsplit {

namespace {

using nlohmann::json;

constexpr const char* kDash = "\xe2\x80\x94";  // em dash for degenerate cells

std::string read_file_bytes(const std::string& path, const char* what) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    fail(ErrorCode::io_failure,
         std::string("cannot open ") + what + ": " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string resolve(const std::filesystem::path& base_dir,
                    const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (base_dir / p).string();
}

void reject_unknown_keys(const json& obj,
                         const std::set<std::string>& allowed,
                         const std::string& where) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key())) {
      fail(ErrorCode::config_error,
           "unknown key '" + item.key() + "' in " + where);
    }
  }
}

void validate_spec(const ExperimentSpec& spec) {
  if (spec.documents.empty()) {
    fail(ErrorCode::config_error, "experiment lists no documents");
  }
  if (spec.policies.empty()) {
    fail(ErrorCode::config_error, "experiment lists no policies");
  }
  if (spec.strategies.empty()) {
    fail(ErrorCode::config_error, "experiment lists no strategies");
  }
  if (spec.pool_size == 0) {
    fail(ErrorCode::config_error, "pool_size must be at least 1");
  }
  if (!(spec.epsilon > 0.0)) {
    fail(ErrorCode::config_error, "epsilon must be positive");
  }
  if (spec.detection.max_cardinality == 0) {
    fail(ErrorCode::config_error, "max_cardinality must be at least 1");
  }
  if (spec.detection.combination_budget == 0) {
    fail(ErrorCode::config_error, "combination_budget must be at least 1");
  }
  std::set<std::string> doc_ids;
  for (const ExperimentDocument& doc : spec.documents) {
    if (doc.doc_id.empty()) {
      fail(ErrorCode::config_error, "experiment document without a doc_id");
    }
    if (!doc_ids.insert(doc.doc_id).second) {
      fail(ErrorCode::config_error, "duplicate document id: " + doc.doc_id);
    }
  }
  std::set<std::string> labels;
  for (const LabeledPolicy& lp : spec.policies) {
    if (lp.label.empty()) {
      fail(ErrorCode::config_error, "experiment policy without a label");
    }
    if (!labels.insert(lp.label).second) {
      fail(ErrorCode::config_error, "duplicate policy label: " + lp.label);
    }
    if (lp.policy.empty()) {
      fail(ErrorCode::config_error, "policy '" + lp.label + "' has no entries");
    }
  }
  std::set<Strategy> seen;
  for (Strategy s : spec.strategies) {
    if (!seen.insert(s).second) {
      fail(ErrorCode::config_error,
           std::string("duplicate strategy: ") + strategy_name(s));
    }
  }
}

struct Cell {
  std::size_t doc = 0;
  std::size_t policy = 0;
  std::size_t strategy = 0;
};

std::string entity_display(const PolicyEntry& entry) {
  return entry.label.empty() ? entry.entity : entry.label;
}

// One (document, policy, strategy) outsourcing; one row per policy entity,
// or a single error row for the whole cell.
std::vector<MetricsRow> run_cell(const ExperimentSpec& spec,
                                 const CorpusIndex& index, const Cell& cell,
                                 std::size_t cell_index) {
  const ExperimentDocument& doc = spec.documents[cell.doc];
  const LabeledPolicy& lp = spec.policies[cell.policy];
  const Strategy strategy = spec.strategies[cell.strategy];

  MetricsRow base;
  base.doc_id = doc.doc_id;
  base.strategy = strategy;

  try {
    LocationPool pool = LocationPool::provision(
        spec.pool_size, BackendKind::memory, {}, cell_index + 1);
    ProxyOptions options;
    options.strategy = strategy;
    options.detection = spec.detection;
    options.epsilon = spec.epsilon;
    Proxy proxy(index, lp.policy, spec.tokenizer, pool, options);

    OutsourceReceipt receipt = proxy.outsource(doc.doc_id, doc.text);

    std::vector<std::vector<std::string>> chunk_terms;
    for (std::uint64_t id : receipt.chunks_touched) {
      chunk_terms.push_back(proxy.chunks().find(id)->term_set());
    }

    std::optional<double> pct_id;
    std::optional<double> pct_quasi;
    if (receipt.content_terms > 0) {
      double denom = static_cast<double>(receipt.content_terms);
      pct_id = 100.0 * static_cast<double>(receipt.identifier_occurrences) /
               denom;
      pct_quasi =
          100.0 * static_cast<double>(receipt.qid_occurrences) / denom;
    }

    std::vector<MetricsRow> rows;
    for (const PolicyEntry& entry : lp.policy.entries) {
      MetricsRow row = base;
      row.instantiation = lp.policy.entries.size() == 1
                              ? lp.label
                              : lp.label + " (" + entity_display(entry) + ")";
      row.pct_identifiers = pct_id;
      row.pct_quasi_identifiers = pct_quasi;
      row.n_locations = chunk_terms.size();
      if (!chunk_terms.empty()) {
        double threshold = proxy.oracle().entity_threshold(entry);
        std::vector<double> norms;
        norms.reserve(chunk_terms.size());
        for (const std::vector<std::string>& terms : chunk_terms) {
          double bits = std::max(0.0, proxy.oracle().pmi(entry, terms));
          norms.push_back(100.0 * bits / threshold);
        }
        double mean = 0.0;
        for (double v : norms) mean += v;
        mean /= static_cast<double>(norms.size());
        double variance = 0.0;
        for (double v : norms) variance += (v - mean) * (v - mean);
        variance /= static_cast<double>(norms.size());
        if (mean > 100.0 + 1e-6) {
          fail(ErrorCode::internal_error,
               "normalized disclosure above the threshold for entity '" +
                   entry.entity + "'");
        }
        row.norm_avg_disclosure = mean;
        row.norm_std_dev = std::sqrt(variance);
      }
      rows.push_back(std::move(row));
    }
    return rows;
  } catch (const Error& e) {
    MetricsRow row = base;
    row.instantiation = lp.label;
    row.error = std::string(error_code_name(e.code())) + ": " + e.what();
    return {row};
  } catch (const std::exception& e) {
    MetricsRow row = base;
    row.instantiation = lp.label;
    row.error = std::string(error_code_name(ErrorCode::internal_error)) +
                ": " + e.what();
    return {row};
  }
}

std::string fmt_pct(const std::optional<double>& v) {
  if (!v.has_value()) return kDash;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", *v);
  return buf;
}

std::string fmt_count(const std::optional<std::size_t>& v) {
  return v.has_value() ? std::to_string(*v) : kDash;
}

std::string csv_field(const std::string& value) {
  if (value.find_first_of(",\"\n") == std::string::npos) return value;
  std::string quoted = "\"";
  for (char c : value) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  quoted += '"';
  return quoted;
}

std::string emit_csv(const std::vector<MetricsRow>& rows) {
  std::string out =
      "document,privacy_model_instantiation,pct_identifiers,"
      "pct_quasi_identifiers,splitting_strategy,n_locations_qids,"
      "norm_avg_disclosure,norm_std_dev,error\n";
  for (const MetricsRow& row : rows) {
    out += csv_field(row.doc_id);
    out += ',';
    out += csv_field(row.instantiation);
    out += ',';
    out += fmt_pct(row.pct_identifiers);
    out += ',';
    out += fmt_pct(row.pct_quasi_identifiers);
    out += ',';
    out += strategy_name(row.strategy);
    out += ',';
    out += fmt_count(row.n_locations);
    out += ',';
    out += fmt_pct(row.norm_avg_disclosure);
    out += ',';
    out += fmt_pct(row.norm_std_dev);
    out += ',';
    out += csv_field(row.error.value_or(""));
    out += '\n';
  }
  return out;
}

std::string emit_markdown(const std::vector<MetricsRow>& rows) {
  static const char* kHeader =
      "| Privacy model instantiation | % Identifiers | % Quasi-identifiers "
      "| Splitting strategy | #Locations (Q-Ids) | Norm. Avg. Disclosure "
      "| Norm. Std. Dev. |\n"
      "|---|---:|---:|---|---:|---:|---:|\n";

  std::string out;
  std::string current_doc;
  bool first_group = true;
  for (const MetricsRow& row : rows) {
    if (first_group || row.doc_id != current_doc) {
      if (!first_group) out += '\n';
      first_group = false;
      current_doc = row.doc_id;
      out += "#### Document ";
      out += row.doc_id;
      out += "\n\n";
      out += kHeader;
    }
    out += "| " + row.instantiation;
    out += " | " + fmt_pct(row.pct_identifiers);
    out += " | " + fmt_pct(row.pct_quasi_identifiers);
    out += " | " + std::string(strategy_name(row.strategy));
    out += " | " + fmt_count(row.n_locations);
    out += " | " + fmt_pct(row.norm_avg_disclosure);
    out += " | " + fmt_pct(row.norm_std_dev);
    out += " |\n";
  }

  out +=
      "\n_Percentages count term occurrences, not distinct terms; "
      "disclosure is normalized by each entity's threshold "
      "informativeness._\n";

  bool any_error = false;
  for (const MetricsRow& row : rows) {
    if (!row.error.has_value()) continue;
    if (!any_error) {
      out += "\n**Errors**\n\n";
      any_error = true;
    }
    out += "- " + row.doc_id + " / " + row.instantiation + " / " +
           strategy_name(row.strategy) + " " + kDash + " " + *row.error +
           "\n";
  }
  return out;
}

}  // namespace

ExperimentSpec parse_experiment_json(const std::string& json_text,
                                     const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::config_error, std::string("experiment JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    fail(ErrorCode::config_error, "experiment spec must be a JSON object");
  }
  reject_unknown_keys(doc,
                      {"corpus", "phrases_path", "stopwords_path",
                       "documents", "policies", "strategies",
                       "max_cardinality", "combination_budget", "pool_size",
                       "epsilon"},
                      "experiment spec");

  ExperimentSpec spec;
  try {
    if (!doc.contains("corpus") || !doc.at("corpus").is_object()) {
      fail(ErrorCode::config_error,
           "experiment spec needs a 'corpus' object with path and mode");
    }
    const json& corpus = doc.at("corpus");
    reject_unknown_keys(corpus, {"path", "mode"}, "'corpus'");
    if (!corpus.contains("path")) {
      fail(ErrorCode::config_error, "'corpus' is missing 'path'");
    }
    CorpusMode mode =
        corpus_mode_from_name(corpus.value("mode", std::string("lines")));
    spec.corpus =
        read_corpus(resolve(base_dir, corpus.at("path").get<std::string>()),
                    mode);

    if (doc.contains("phrases_path")) {
      spec.tokenizer.phrases = load_term_list_file(
          resolve(base_dir, doc.at("phrases_path").get<std::string>()));
    }
    if (doc.contains("stopwords_path")) {
      for (const std::string& word : load_term_list_file(resolve(
               base_dir, doc.at("stopwords_path").get<std::string>()))) {
        spec.tokenizer.stopwords.insert(word);
      }
    }

    if (!doc.contains("documents") || !doc.at("documents").is_array()) {
      fail(ErrorCode::config_error,
           "experiment spec needs a 'documents' array");
    }
    for (const json& item : doc.at("documents")) {
      if (!item.is_object()) {
        fail(ErrorCode::config_error, "document entries must be objects");
      }
      reject_unknown_keys(item, {"doc_id", "path", "text"}, "'documents'");
      ExperimentDocument ed;
      ed.doc_id = item.value("doc_id", std::string());
      if (item.contains("path") == item.contains("text")) {
        fail(ErrorCode::config_error,
             "document '" + ed.doc_id +
                 "' needs exactly one of 'path' or 'text'");
      }
      if (item.contains("path")) {
        ed.text = read_file_bytes(
            resolve(base_dir, item.at("path").get<std::string>()),
            "document file");
      } else {
        ed.text = item.at("text").get<std::string>();
      }
      spec.documents.push_back(std::move(ed));
    }

    if (!doc.contains("policies") || !doc.at("policies").is_array()) {
      fail(ErrorCode::config_error,
           "experiment spec needs a 'policies' array");
    }
    for (const json& item : doc.at("policies")) {
      if (!item.is_object()) {
        fail(ErrorCode::config_error, "policy entries must be objects");
      }
      reject_unknown_keys(item, {"label", "path", "entries"}, "'policies'");
      LabeledPolicy lp;
      lp.label = item.value("label", std::string());
      if (item.contains("path") == item.contains("entries")) {
        fail(ErrorCode::config_error,
             "policy '" + lp.label +
                 "' needs exactly one of 'path' or 'entries'");
      }
      if (item.contains("path")) {
        lp.policy = load_policy_file(
            resolve(base_dir, item.at("path").get<std::string>()));
      } else {
        lp.policy = parse_policy_json(item.at("entries").dump());
      }
      spec.policies.push_back(std::move(lp));
    }

    if (doc.contains("strategies")) {
      if (!doc.at("strategies").is_array()) {
        fail(ErrorCode::config_error, "'strategies' must be an array");
      }
      for (const json& name : doc.at("strategies")) {
        spec.strategies.push_back(
            strategy_from_name(name.get<std::string>()));
      }
    } else {
      spec.strategies = {Strategy::naive, Strategy::greedy_plain,
                         Strategy::greedy_heuristic};
    }

    spec.detection.max_cardinality =
        doc.value("max_cardinality", spec.detection.max_cardinality);
    spec.detection.combination_budget =
        doc.value("combination_budget", spec.detection.combination_budget);
    spec.pool_size = doc.value("pool_size", spec.pool_size);
    spec.epsilon = doc.value("epsilon", spec.epsilon);
  } catch (const json::exception& e) {
    fail(ErrorCode::config_error, std::string("experiment JSON: ") + e.what());
  }

  validate_spec(spec);
  return spec;
}

ExperimentSpec load_experiment_file(const std::string& path) {
  std::string text = read_file_bytes(path, "experiment file");
  return parse_experiment_json(text,
                               std::filesystem::path(path).parent_path());
}

std::vector<MetricsRow> run_experiment(const ExperimentSpec& spec) {
  validate_spec(spec);
  CorpusIndex index = CorpusIndex::build(spec.corpus, spec.tokenizer);
  KnowledgeOracle oracle(index, spec.epsilon);
  for (const LabeledPolicy& lp : spec.policies) {
    oracle.validate_policy(lp.policy);
  }

  std::vector<Cell> cells;
  for (std::size_t d = 0; d < spec.documents.size(); ++d) {
    for (std::size_t p = 0; p < spec.policies.size(); ++p) {
      for (std::size_t s = 0; s < spec.strategies.size(); ++s) {
        cells.push_back({d, p, s});
      }
    }
  }

  // Cells are independent; a small worker pool fills a pre-sized result
  // table so the output order never depends on scheduling.
  std::vector<std::vector<MetricsRow>> cell_rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next.fetch_add(1); i < cells.size();
         i = next.fetch_add(1)) {
      cell_rows[i] = run_cell(spec, index, cells[i], i);
    }
  };
  std::size_t workers = std::max<std::size_t>(
      1, std::min<std::size_t>(cells.size(),
                               std::thread::hardware_concurrency()));
  std::vector<std::future<void>> futures;
  futures.reserve(workers);
  for (std::size_t i = 0; i < workers; ++i) {
    futures.push_back(std::async(std::launch::async, worker));
  }
  for (std::future<void>& f : futures) f.get();

  std::vector<MetricsRow> rows;
  for (std::vector<MetricsRow>& group : cell_rows) {
    for (MetricsRow& row : group) rows.push_back(std::move(row));
  }
  return rows;
}

ReportFormat report_format_from_name(const std::string& name) {
  if (name == "csv") return ReportFormat::csv;
  if (name == "md" || name == "markdown") return ReportFormat::markdown;
  fail(ErrorCode::config_error,
       "unknown report format '" + name + "' (expected csv|md)");
}

std::string emit_report(const std::vector<MetricsRow>& rows,
                        ReportFormat format) {
  return format == ReportFormat::csv ? emit_csv(rows) : emit_markdown(rows);
}

std::size_t bruteforce_partition_oracle(const std::vector<std::string>& terms,
                                        const PrivacyPolicy& policy,
                                        const KnowledgeOracle& oracle) {
  std::vector<std::string> distinct = terms;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  if (distinct.size() > 8) {
    fail(ErrorCode::too_large,
         "partition search is limited to 8 distinct terms, got " +
             std::to_string(distinct.size()));
  }
  if (distinct.empty()) return 0;

  auto safe = [&](const std::vector<std::string>& block) {
    return !oracle.check_disclosure(policy, block).disclosing;
  };
  for (const std::string& term : distinct) {
    if (!safe({term})) {
      fail(ErrorCode::allocation_impossible,
           "term '" + term + "' discloses on its own; no partition is safe");
    }
  }

  // Branch and bound over block assignments: all singletons are safe, so
  // distinct.size() blocks is always achievable and bounds the search.
  std::size_t best = distinct.size();
  std::vector<std::vector<std::string>> blocks;
  blocks.reserve(distinct.size());
  std::function<void(std::size_t)> place = [&](std::size_t i) {
    if (blocks.size() >= best) return;
    if (i == distinct.size()) {
      best = blocks.size();
      return;
    }
    // Indexed loop: deeper calls grow and shrink `blocks`.
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      blocks[b].push_back(distinct[i]);
      if (safe(blocks[b])) place(i + 1);
      blocks[b].pop_back();
    }
    blocks.push_back({distinct[i]});
    place(i + 1);
    blocks.pop_back();
  };
  place(0);
  return best;
}

}  // namespace semsplit
