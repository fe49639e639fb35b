#include "semsplit/session.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <utility>

#include "json.hpp"
#include "semsplit/errors.hpp"

namespace semsplit {

namespace {

using nlohmann::json;

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

std::string require_string(const json& obj, const char* key,
                           const std::string& where) {
  if (!obj.contains(key) || !obj.at(key).is_string() ||
      obj.at(key).get<std::string>().empty()) {
    fail(ErrorCode::config_error,
         where + " needs a non-empty string '" + key + "'");
  }
  return obj.at(key).get<std::string>();
}

void require_input_file(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    fail(ErrorCode::config_error,
         std::string(what) + " does not exist: " + path);
  }
}

void create_parent_dirs(const std::string& path) {
  std::filesystem::path parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace

ProxyConfig parse_config_json(const std::string& json_text,
                              const std::filesystem::path& base_dir) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCode::config_error, std::string("config JSON: ") + e.what());
  }
  if (!doc.is_object()) {
    fail(ErrorCode::config_error, "config must be a JSON object");
  }
  reject_unknown_keys(doc,
                      {"corpus", "index_path", "phrases_path",
                       "stopwords_path", "policy_path", "pool",
                       "metadata_path", "strategy", "max_cardinality",
                       "combination_budget", "epsilon", "sentinels",
                       "user_id"},
                      "config");

  ProxyConfig config;
  try {
    if (!doc.contains("corpus") || !doc.at("corpus").is_object()) {
      fail(ErrorCode::config_error,
           "config needs a 'corpus' object with path and mode");
    }
    const json& corpus = doc.at("corpus");
    reject_unknown_keys(corpus, {"path", "mode"}, "'corpus'");
    config.corpus_path =
        resolve(base_dir, require_string(corpus, "path", "'corpus'"));
    config.corpus_mode =
        corpus_mode_from_name(corpus.value("mode", std::string("lines")));

    config.index_path =
        resolve(base_dir, require_string(doc, "index_path", "config"));
    if (doc.contains("phrases_path")) {
      config.phrases_path =
          resolve(base_dir, require_string(doc, "phrases_path", "config"));
    }
    if (doc.contains("stopwords_path")) {
      config.stopwords_path =
          resolve(base_dir, require_string(doc, "stopwords_path", "config"));
    }
    config.policy_path =
        resolve(base_dir, require_string(doc, "policy_path", "config"));
    config.metadata_path =
        resolve(base_dir, require_string(doc, "metadata_path", "config"));

    if (!doc.contains("pool") || !doc.at("pool").is_object()) {
      fail(ErrorCode::config_error, "config needs a 'pool' object");
    }
    const json& pool = doc.at("pool");
    reject_unknown_keys(pool, {"manifest_path", "size", "backend", "root"},
                        "'pool'");
    config.pool.manifest_path =
        resolve(base_dir, require_string(pool, "manifest_path", "'pool'"));
    config.pool.size = pool.value("size", config.pool.size);
    config.pool.backend =
        backend_from_name(pool.value("backend", std::string("directory")));
    if (pool.contains("root")) {
      config.pool.root =
          resolve(base_dir, require_string(pool, "root", "'pool'"));
    }
    if (config.pool.backend == BackendKind::directory &&
        config.pool.root.empty()) {
      fail(ErrorCode::config_error,
           "'pool' with the directory backend needs 'root'");
    }
    if (config.pool.size == 0) {
      fail(ErrorCode::config_error, "pool size must be at least 1");
    }

    if (doc.contains("strategy")) {
      config.strategy =
          strategy_from_name(doc.at("strategy").get<std::string>());
    }
    config.detection.max_cardinality =
        doc.value("max_cardinality", config.detection.max_cardinality);
    config.detection.combination_budget =
        doc.value("combination_budget", config.detection.combination_budget);
    config.epsilon = doc.value("epsilon", config.epsilon);
    config.user_id = doc.value("user_id", config.user_id);
    if (doc.contains("sentinels")) {
      const json& sentinels = doc.at("sentinels");
      reject_unknown_keys(sentinels, {"id", "qid"}, "'sentinels'");
      config.sentinels.id = require_string(sentinels, "id", "'sentinels'");
      config.sentinels.qid = require_string(sentinels, "qid", "'sentinels'");
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::config_error, std::string("config JSON: ") + e.what());
  }

  if (config.detection.max_cardinality == 0) {
    fail(ErrorCode::config_error, "max_cardinality must be at least 1");
  }
  if (config.detection.combination_budget == 0) {
    fail(ErrorCode::config_error, "combination_budget must be at least 1");
  }
  if (!(config.epsilon > 0.0)) {
    fail(ErrorCode::config_error, "epsilon must be positive");
  }

  require_input_file(config.corpus_path, "corpus");
  require_input_file(config.policy_path, "policy file");
  if (config.phrases_path) {
    require_input_file(*config.phrases_path, "phrase list");
  }
  if (config.stopwords_path) {
    require_input_file(*config.stopwords_path, "stopword list");
  }
  return config;
}

ProxyConfig load_config_file(const std::string& path) {
  std::string text = read_file_bytes(path, "config file");
  // Absolute base dir: resolved paths stay valid if the process later
  // changes its working directory.
  return parse_config_json(
      text, std::filesystem::absolute(std::filesystem::path(path))
                .parent_path());
}

const char* update_op_name(UpdateOp op) {
  switch (op) {
    case UpdateOp::erase:
      return "delete";
    case UpdateOp::replace:
      return "replace";
    case UpdateOp::insert:
      return "insert";
  }
  return "unknown";
}

UpdateOp update_op_from_name(const std::string& name) {
  if (name == "delete") return UpdateOp::erase;
  if (name == "replace") return UpdateOp::replace;
  if (name == "insert") return UpdateOp::insert;
  fail(ErrorCode::config_error,
       "unknown update operation '" + name +
           "' (expected delete|replace|insert)");
}

Session::Session(ProxyConfig config) : config_(std::move(config)) {}

Session::IndexStats Session::build_index() {
  proxy_.reset();  // it references the index being replaced
  pool_.reset();

  TokenizerConfig tokenizer;
  if (config_.phrases_path) {
    tokenizer.phrases = load_term_list_file(*config_.phrases_path);
  }
  if (config_.stopwords_path) {
    for (const std::string& word :
         load_term_list_file(*config_.stopwords_path)) {
      tokenizer.stopwords.insert(word);
    }
  }
  std::vector<std::string> corpus =
      read_corpus(config_.corpus_path, config_.corpus_mode);
  CorpusIndex index = CorpusIndex::build(corpus, tokenizer);
  create_parent_dirs(config_.index_path);
  index.save(config_.index_path);

  tokenizer_ = std::move(tokenizer);
  index_ = std::move(index);
  return {index_->total_docs(), index_->vocabulary_size()};
}

void Session::set_strategy(Strategy strategy) {
  if (proxy_.has_value()) {
    fail(ErrorCode::config_error,
         "the strategy can only change before the proxy is assembled");
  }
  config_.strategy = strategy;
}

void Session::ensure_proxy() {
  if (proxy_.has_value()) return;

  if (!index_.has_value()) {
    if (std::filesystem::exists(config_.index_path)) {
      tokenizer_ = TokenizerConfig{};
      if (config_.phrases_path) {
        tokenizer_.phrases = load_term_list_file(*config_.phrases_path);
      }
      if (config_.stopwords_path) {
        for (const std::string& word :
             load_term_list_file(*config_.stopwords_path)) {
          tokenizer_.stopwords.insert(word);
        }
      }
      index_ = CorpusIndex::load(config_.index_path);
    } else {
      build_index();
    }
  }

  // The saved index remembers its phrase list; a drifted phrase file would
  // tokenize documents differently than the corpus was counted.
  std::set<std::string> configured(tokenizer_.phrases.begin(),
                                   tokenizer_.phrases.end());
  if (configured != index_->phrases()) {
    fail(ErrorCode::config_error,
         "the phrase list changed since the index was built; rebuild the "
         "index");
  }

  PrivacyPolicy policy = load_policy_file(config_.policy_path);

  if (!pool_.has_value()) {
    if (std::filesystem::exists(config_.pool.manifest_path)) {
      pool_ = LocationPool::from_manifest(config_.pool.manifest_path);
    } else {
      if (config_.pool.backend == BackendKind::directory) {
        std::filesystem::create_directories(config_.pool.root);
      }
      pool_ = LocationPool::provision(config_.pool.size, config_.pool.backend,
                                      config_.pool.root);
      create_parent_dirs(config_.pool.manifest_path);
      pool_->save_manifest(config_.pool.manifest_path);
    }
  }

  ProxyOptions options;
  options.strategy = config_.strategy;
  options.detection = config_.detection;
  options.sentinels = config_.sentinels;
  options.epsilon = config_.epsilon;
  options.user_id = config_.user_id;
  proxy_.emplace(*index_, std::move(policy), tokenizer_, *pool_, options);

  if (std::filesystem::exists(config_.metadata_path)) {
    proxy_->load_metadata(config_.metadata_path);
  }
}

void Session::persist() {
  create_parent_dirs(config_.metadata_path);
  proxy_->persist_metadata(config_.metadata_path);
}

OutsourceReceipt Session::outsource_text(const std::string& doc_id,
                                         const std::string& text) {
  ensure_proxy();
  OutsourceReceipt receipt = proxy_->outsource(doc_id, text);
  persist();
  return receipt;
}

OutsourceReceipt Session::outsource_file(const std::string& doc_id,
                                         const std::string& file_path) {
  return outsource_text(doc_id, read_file_bytes(file_path, "document file"));
}

std::string Session::retrieve(const std::string& doc_id) {
  ensure_proxy();
  return proxy_->retrieve(doc_id);
}

QueryResult Session::search(const std::string& expr) {
  ensure_proxy();
  return proxy_->boolean_search(expr);
}

void Session::update(const std::string& doc_id, UpdateOp op,
                     std::size_t position, const std::string& text) {
  ensure_proxy();
  switch (op) {
    case UpdateOp::erase:
      proxy_->delete_term(doc_id, position);
      break;
    case UpdateOp::replace:
      proxy_->replace_term(doc_id, position, text);
      break;
    case UpdateOp::insert:
      proxy_->insert_term(doc_id, position, text);
      break;
  }
  persist();
}

StatusReport Session::status() {
  ensure_proxy();
  return proxy_->status();
}

std::string Session::eval(const std::string& experiment_path,
                          ReportFormat format) {
  ExperimentSpec spec = load_experiment_file(experiment_path);
  return emit_report(run_experiment(spec), format);
}

Proxy& Session::proxy() {
  ensure_proxy();
  return *proxy_;
}

}  // namespace semsplit
