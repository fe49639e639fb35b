#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "semsplit/corpus.hpp"
#include "semsplit/detection.hpp"
#include "semsplit/evalharness.hpp"
#include "semsplit/policy.hpp"
#include "semsplit/proxy.hpp"
#include "semsplit/splitting.hpp"
#include "semsplit/storage.hpp"
#include "semsplit/text.hpp"

namespace semsplit {

struct PoolConfig {
  std::string manifest_path;
  std::size_t size = 4;
  BackendKind backend = BackendKind::directory;
  std::string root;  // per-location directories live here (directory backend)
};

// Everything one operator session needs, loaded from a JSON file. All
// relative paths resolve against the config file's directory; input files
// (corpus, policy, term lists) must exist at load time, state files (index,
// manifest, metadata, location root) are created on demand.
struct ProxyConfig {
  std::string corpus_path;
  CorpusMode corpus_mode = CorpusMode::lines;
  std::string index_path;
  std::optional<std::string> phrases_path;
  std::optional<std::string> stopwords_path;
  std::string policy_path;
  PoolConfig pool;
  std::string metadata_path;
  Strategy strategy = Strategy::greedy_heuristic;
  DetectionConfig detection;
  double epsilon = kDefaultEpsilonBits;
  SentinelConfig sentinels;
  std::string user_id = "user-0";
};

// JSON object:
//   corpus: {path, mode: lines|directory}     index_path: string
//   phrases_path, stopwords_path: optional    policy_path: string
//   pool: {manifest_path, size, backend: memory|directory, root}
//   metadata_path: string                     strategy: naive|plain|heuristic
//   max_cardinality, combination_budget, epsilon, user_id: optional
//   sentinels: optional {id, qid}
ProxyConfig load_config_file(const std::string& path);
ProxyConfig parse_config_json(const std::string& json_text,
                              const std::filesystem::path& base_dir);

enum class UpdateOp { erase, replace, insert };

const char* update_op_name(UpdateOp op);
UpdateOp update_op_from_name(const std::string& name);  // delete|replace|insert

// One operator session over a config: assembles the proxy lazily (index
// loaded from index_path or built and saved, pool from its manifest or
// freshly provisioned, metadata loaded when the store exists) and persists
// metadata after every mutation so state survives the process.
class Session {
 public:
  explicit Session(ProxyConfig config);

  struct IndexStats {
    std::uint64_t documents = 0;
    std::size_t vocabulary = 0;
  };

  // Rebuilds the corpus index from the configured corpus and saves it,
  // discarding any assembled proxy (it would reference the old index).
  IndexStats build_index();

  // Overrides the configured strategy; only callable before the proxy is
  // first assembled.
  void set_strategy(Strategy strategy);

  OutsourceReceipt outsource_text(const std::string& doc_id,
                                  const std::string& text);
  OutsourceReceipt outsource_file(const std::string& doc_id,
                                  const std::string& file_path);
  std::string retrieve(const std::string& doc_id);
  QueryResult search(const std::string& expr);
  void update(const std::string& doc_id, UpdateOp op, std::size_t position,
              const std::string& text);
  StatusReport status();

  // Self-contained: runs the experiment file's own corpus and policies.
  std::string eval(const std::string& experiment_path, ReportFormat format);

  const ProxyConfig& config() const { return config_; }
  Proxy& proxy();  // assembles on first use

 private:
  void ensure_proxy();
  void persist();

  ProxyConfig config_;
  TokenizerConfig tokenizer_;
  std::optional<CorpusIndex> index_;
  std::optional<LocationPool> pool_;
  std::optional<Proxy> proxy_;
};

}  // namespace semsplit
