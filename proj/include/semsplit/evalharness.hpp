#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "semsplit/corpus.hpp"
#include "semsplit/detection.hpp"
#include "semsplit/knowledge.hpp"
#include "semsplit/policy.hpp"
#include "semsplit/splitting.hpp"
#include "semsplit/text.hpp"

namespace semsplit {

struct ExperimentDocument {
  std::string doc_id;
  std::string text;
};

// A policy under a report label. Multi-entity policies produce one metrics
// row per entity, each labeled "<label> (<entity label>)".
struct LabeledPolicy {
  std::string label;
  PrivacyPolicy policy;
};

// Full evaluation grid: every (document, policy, strategy) combination is
// outsourced once, against a fresh in-memory pool of pool_size locations.
struct ExperimentSpec {
  std::vector<std::string> corpus;  // raw background corpus documents
  TokenizerConfig tokenizer;
  std::vector<ExperimentDocument> documents;
  std::vector<LabeledPolicy> policies;
  std::vector<Strategy> strategies;
  DetectionConfig detection;
  std::size_t pool_size = 8;
  double epsilon = kDefaultEpsilonBits;
};

// JSON object:
//   corpus: {path, mode: lines|directory}
//   phrases_path, stopwords_path: optional term-list files
//   documents: [{doc_id, path | text}]
//   policies:  [{label, path | entries}]   (entries = policy-file array)
//   strategies: optional [naive|plain|heuristic], default all three
//   max_cardinality, combination_budget, pool_size, epsilon: optional
// Relative paths resolve against base_dir (the spec file's directory).
ExperimentSpec load_experiment_file(const std::string& path);
ExperimentSpec parse_experiment_json(const std::string& json_text,
                                     const std::filesystem::path& base_dir);

// One grid cell, scored for one policy entity. Percentages count term
// occurrences, not distinct terms. A metric is nullopt when its
// denominator is empty (no content terms, no chunks) or when `error` is
// set; degenerate cells render as an em dash.
struct MetricsRow {
  std::string doc_id;
  std::string instantiation;  // policy label (plus entity when multi-entity)
  Strategy strategy = Strategy::naive;
  std::optional<double> pct_identifiers;
  std::optional<double> pct_quasi_identifiers;
  std::optional<std::size_t> n_locations;  // chunks holding quasi-identifiers
  std::optional<double> norm_avg_disclosure;  // % of the entity's threshold
  std::optional<double> norm_std_dev;         // population form
  std::optional<std::string> error;  // "CATEGORY: message" when the cell failed
};

// Runs the grid in (document, policy, strategy) order. A cell that fails
// contributes a single error row and the remaining cells still run.
// norm_avg_disclosure never exceeds 100 (+ slack): chunks are
// disclosure-free by construction.
std::vector<MetricsRow> run_experiment(const ExperimentSpec& spec);

enum class ReportFormat { csv, markdown };
ReportFormat report_format_from_name(const std::string& name);

// Deterministic rendering, two decimal places, rows in input order.
// CSV: one header plus one line per row ("document" first, "error" last).
// Markdown: rows grouped by document under a fixed seven-column table
// header, followed by a note on occurrence counting and any cell errors.
std::string emit_report(const std::vector<MetricsRow>& rows,
                        ReportFormat format);

// Exact minimum number of disclosure-free blocks over all set partitions
// of `terms` (deduplicated). Exponential search, refuses more than 8
// terms (TooLarge); throws AllocationImpossible when some term discloses
// alone, since then no partition is safe.
std::size_t bruteforce_partition_oracle(const std::vector<std::string>& terms,
                                        const PrivacyPolicy& policy,
                                        const KnowledgeOracle& oracle);

}  // namespace semsplit
