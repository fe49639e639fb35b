// Operator entry point. Every subcommand loads a session from --config,
// delegates to the shared library, and exits with the library status code
// (0 on success). Failures print exactly one "CATEGORY: message" line to
// stderr. Set SEMSPLIT_LOG=1 for progress lines on stderr.
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "semsplit.h"

using nlohmann::json;

namespace {

bool log_enabled() {
  const char* value = std::getenv("SEMSPLIT_LOG");
  return value != nullptr && value[0] != '\0' &&
         std::string(value) != "0";
}

void log_line(const std::string& message) {
  if (log_enabled()) {
    std::cerr << "[semsplit] " << message << "\n";
  }
}

int report_failure(int status, const std::string& message) {
  std::cerr << semsplit_status_name(status) << ": " << message << "\n";
  return status;
}

int report_failure(semsplit_t* handle, int status) {
  return report_failure(status, semsplit_last_error(handle));
}

// Opens the session, applies --strategy when given, runs body, closes.
int with_session(const std::string& config_path, const std::string& strategy,
                 const std::function<int(semsplit_t*)>& body) {
  log_line("loading config " + config_path);
  int status = SEMSPLIT_OK;
  char* message = nullptr;
  semsplit_t* handle = semsplit_open(config_path.c_str(), &status, &message);
  if (handle == nullptr) {
    std::string text = message != nullptr ? message : "cannot open session";
    semsplit_free(message);
    return report_failure(status, text);
  }
  int rc = SEMSPLIT_OK;
  if (!strategy.empty()) {
    rc = semsplit_set_strategy(handle, strategy.c_str());
    if (rc != SEMSPLIT_OK) {
      rc = report_failure(handle, rc);
    }
  }
  if (rc == SEMSPLIT_OK) {
    rc = body(handle);
  }
  semsplit_close(handle);
  return rc;
}

int write_output(const std::string& path, const char* data, size_t length) {
  if (path.empty()) {
    std::fwrite(data, 1, length, stdout);
    return std::fflush(stdout) == 0
               ? SEMSPLIT_OK
               : report_failure(SEMSPLIT_IO_FAILURE, "cannot write stdout");
  }
  std::ofstream out(path, std::ios::binary);
  out.write(data, static_cast<std::streamsize>(length));
  out.flush();
  if (!out.good()) {
    return report_failure(SEMSPLIT_IO_FAILURE, "cannot write " + path);
  }
  log_line("wrote " + std::to_string(length) + " bytes to " + path);
  return SEMSPLIT_OK;
}

int run_index(semsplit_t* handle) {
  unsigned long long documents = 0;
  size_t vocabulary = 0;
  int rc = semsplit_index_build(handle, &documents, &vocabulary);
  if (rc != SEMSPLIT_OK) {
    return report_failure(handle, rc);
  }
  std::cout << "indexed " << documents << " documents (" << vocabulary
            << " distinct terms)\n";
  return SEMSPLIT_OK;
}

int run_outsource(semsplit_t* handle, const std::string& doc_id,
                  const std::string& file) {
  log_line("outsourcing " + file);
  char* receipt = nullptr;
  int rc = semsplit_outsource_file(
      handle, doc_id.empty() ? nullptr : doc_id.c_str(), file.c_str(),
      &receipt);
  if (rc != SEMSPLIT_OK) {
    return report_failure(handle, rc);
  }
  std::cout << receipt << "\n";
  semsplit_free(receipt);
  return SEMSPLIT_OK;
}

int run_retrieve(semsplit_t* handle, const std::string& doc_id,
                 const std::string& output) {
  char* text = nullptr;
  size_t length = 0;
  int rc = semsplit_retrieve(handle, doc_id.c_str(), &text, &length);
  if (rc != SEMSPLIT_OK) {
    return report_failure(handle, rc);
  }
  rc = write_output(output, text, length);
  semsplit_free(text);
  return rc;
}

int run_search(semsplit_t* handle, const std::string& expr) {
  char* hits = nullptr;
  int rc = semsplit_search(handle, expr.c_str(), &hits);
  if (rc != SEMSPLIT_OK) {
    return report_failure(handle, rc);
  }
  for (const json& doc_id : json::parse(hits)) {
    std::cout << doc_id.get<std::string>() << "\n";
  }
  semsplit_free(hits);
  return SEMSPLIT_OK;
}

int run_update(semsplit_t* handle, const std::string& doc_id,
               const std::string& op, size_t position, bool has_text,
               const std::string& text) {
  if (op != "delete" && !has_text) {
    return report_failure(SEMSPLIT_CONFIG_ERROR,
                          "--text is required for " + op);
  }
  int rc = semsplit_update(handle, doc_id.c_str(), op.c_str(), position,
                           has_text ? text.c_str() : nullptr);
  if (rc != SEMSPLIT_OK) {
    return report_failure(handle, rc);
  }
  log_line(op + " applied to " + doc_id + " at position " +
           std::to_string(position));
  return SEMSPLIT_OK;
}

int run_eval(semsplit_t* handle, const std::string& experiment,
             const std::string& format, const std::string& output) {
  log_line("running experiment " + experiment);
  char* rendered = nullptr;
  int rc = semsplit_eval(handle, experiment.c_str(), format.c_str(),
                         &rendered);
  if (rc != SEMSPLIT_OK) {
    return report_failure(handle, rc);
  }
  rc = write_output(output, rendered, std::strlen(rendered));
  semsplit_free(rendered);
  return rc;
}

int run_status(semsplit_t* handle) {
  char* report = nullptr;
  int rc = semsplit_status_report(handle, &report);
  if (rc != SEMSPLIT_OK) {
    return report_failure(handle, rc);
  }
  json status = json::parse(report);
  semsplit_free(report);
  std::cout << "documents: " << status.at("document_count").get<size_t>()
            << "\n";
  std::cout << "locations: " << status.at("locations").size() << "\n";
  for (const json& loc : status.at("locations")) {
    std::cout << "  " << loc.at("location_id").get<std::string>() << ": "
              << loc.at("item_count").get<size_t>() << " items\n";
  }
  std::cout << "chunks: " << status.at("chunks").size() << "\n";
  for (const json& chunk : status.at("chunks")) {
    char score[32];
    std::snprintf(score, sizeof(score), "%.4f",
                  chunk.at("disclosure_score").get<double>());
    std::cout << "  chunk " << chunk.at("chunk_id").get<uint64_t>() << " @ "
              << chunk.at("location_id").get<std::string>() << ": live "
              << chunk.at("live_entries").get<size_t>() << ", tombstones "
              << chunk.at("tombstones").get<size_t>() << ", disclosure "
              << score << "\n";
  }
  return SEMSPLIT_OK;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"privacy proxy: split documents into disclosure-free chunks"};
  app.require_subcommand(1);

  std::string config;
  std::string strategy;
  std::string doc_id;
  std::string file;
  std::string expr;
  std::string op;
  std::string text;
  std::string output;
  std::string format = "csv";
  size_t position = 0;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config, "session config JSON")
        ->required();
    sub->add_option("--strategy", strategy,
                    "override the configured splitting strategy")
        ->check(CLI::IsMember({"naive", "plain", "heuristic"}));
  };

  int rc = SEMSPLIT_OK;

  CLI::App* index_cmd =
      app.add_subcommand("index", "build the corpus index and save it");
  add_common(index_cmd);
  index_cmd->callback([&] {
    rc = with_session(config, strategy, run_index);
  });

  CLI::App* outsource_cmd = app.add_subcommand(
      "outsource", "split a document across the location pool");
  add_common(outsource_cmd);
  outsource_cmd->add_option("file", file, "document to outsource")
      ->required();
  outsource_cmd->add_option("--doc-id", doc_id,
                            "document id (auto-assigned when omitted)");
  outsource_cmd->callback([&] {
    rc = with_session(config, strategy, [&](semsplit_t* handle) {
      return run_outsource(handle, doc_id, file);
    });
  });

  CLI::App* retrieve_cmd = app.add_subcommand(
      "retrieve", "reconstruct a document byte-exactly");
  add_common(retrieve_cmd);
  retrieve_cmd->add_option("doc_id", doc_id, "document id")->required();
  retrieve_cmd->add_option("-o,--output", output,
                           "write to this file instead of stdout");
  retrieve_cmd->callback([&] {
    rc = with_session(config, strategy, [&](semsplit_t* handle) {
      return run_retrieve(handle, doc_id, output);
    });
  });

  CLI::App* search_cmd = app.add_subcommand(
      "search", "boolean keyword query; prints matching ids sorted");
  add_common(search_cmd);
  search_cmd->add_option("expr", expr, "query, e.g. 'fever AND NOT rash'")
      ->required();
  search_cmd->callback([&] {
    rc = with_session(config, strategy, [&](semsplit_t* handle) {
      return run_search(handle, expr);
    });
  });

  CLI::App* update_cmd = app.add_subcommand(
      "update", "edit one content term of a stored document");
  add_common(update_cmd);
  update_cmd->add_option("doc_id", doc_id, "document id")->required();
  update_cmd->add_option("op", op, "delete, replace, or insert")
      ->required()
      ->check(CLI::IsMember({"delete", "replace", "insert"}));
  update_cmd
      ->add_option("--position", position,
                   "content-term position (0-based; insert appends when "
                   "equal to the term count)")
      ->required();
  update_cmd->add_option("--text", text,
                         "replacement or inserted term (not for delete)");
  update_cmd->callback([&] {
    bool has_text = update_cmd->count("--text") > 0;
    rc = with_session(config, strategy, [&](semsplit_t* handle) {
      return run_update(handle, doc_id, op, position, has_text, text);
    });
  });

  CLI::App* eval_cmd = app.add_subcommand(
      "eval", "run an experiment grid and render the report");
  add_common(eval_cmd);
  eval_cmd->add_option("experiment", file, "experiment spec JSON")
      ->required();
  eval_cmd->add_option("--format", format, "report format")
      ->check(CLI::IsMember({"csv", "md"}));
  eval_cmd->add_option("-o,--output", output,
                       "write to this file instead of stdout");
  eval_cmd->callback([&] {
    rc = with_session(config, strategy, [&](semsplit_t* handle) {
      return run_eval(handle, file, format, output);
    });
  });

  CLI::App* status_cmd = app.add_subcommand(
      "status", "pool occupancy, chunk inventory, disclosure scores");
  add_common(status_cmd);
  status_cmd->callback([&] {
    rc = with_session(config, strategy, run_status);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      return app.exit(e);  // --help / --version
    }
    return report_failure(SEMSPLIT_CONFIG_ERROR, e.what());
  }
  return rc;
}
