#include "semsplit.h"

#include <cstdlib>
#include <cstring>
#include <string>
#include <utility>

#include "json.hpp"
#include "semsplit/errors.hpp"
#include "semsplit/session.hpp"

struct semsplit_session {
  semsplit::Session session;
  std::string last_error;
};

namespace {

using nlohmann::json;
using semsplit::Error;
using semsplit::ErrorCode;

char* dup_bytes(const std::string& value) {
  char* out = static_cast<char*>(std::malloc(value.size() + 1));
  if (out == nullptr) return nullptr;
  std::memcpy(out, value.data(), value.size());
  out[value.size()] = '\0';
  return out;
}

int code_int(ErrorCode code) { return static_cast<int>(code); }

// Runs the operation, capturing the error message on the handle.
template <typename F>
int guarded(semsplit_t* handle, F&& op) {
  if (handle == nullptr) return code_int(ErrorCode::config_error);
  try {
    op();
    handle->last_error.clear();
    return 0;
  } catch (const Error& e) {
    handle->last_error = e.what();
    return code_int(e.code());
  } catch (const std::exception& e) {
    handle->last_error = e.what();
    return code_int(ErrorCode::internal_error);
  }
}

const char* require_cstr(const char* value, const char* what) {
  if (value == nullptr) {
    semsplit::fail(ErrorCode::config_error,
                   std::string(what) + " must not be NULL");
  }
  return value;
}

}  // namespace

extern "C" {

semsplit_t* semsplit_open(const char* config_path, int* status,
                          char** error_message) {
  if (error_message != nullptr) *error_message = nullptr;
  auto report = [&](ErrorCode code, const std::string& message) {
    if (status != nullptr) *status = code_int(code);
    if (error_message != nullptr) *error_message = dup_bytes(message);
  };
  if (config_path == nullptr) {
    report(ErrorCode::config_error, "config_path must not be NULL");
    return nullptr;
  }
  try {
    semsplit::ProxyConfig config = semsplit::load_config_file(config_path);
    auto* handle =
        new semsplit_session{semsplit::Session(std::move(config)), {}};
    if (status != nullptr) *status = 0;
    return handle;
  } catch (const Error& e) {
    report(e.code(), e.what());
  } catch (const std::exception& e) {
    report(ErrorCode::internal_error, e.what());
  }
  return nullptr;
}

void semsplit_close(semsplit_t* handle) { delete handle; }

const char* semsplit_last_error(const semsplit_t* handle) {
  return handle == nullptr ? "" : handle->last_error.c_str();
}

const char* semsplit_status_name(int status) {
  if (status < 0 || status > code_int(ErrorCode::internal_error)) {
    return "UNKNOWN";
  }
  return semsplit::error_code_name(static_cast<ErrorCode>(status));
}

int semsplit_index_build(semsplit_t* handle, unsigned long long* documents,
                         size_t* vocabulary) {
  return guarded(handle, [&] {
    semsplit::Session::IndexStats stats = handle->session.build_index();
    if (documents != nullptr) *documents = stats.documents;
    if (vocabulary != nullptr) *vocabulary = stats.vocabulary;
  });
}

int semsplit_set_strategy(semsplit_t* handle, const char* strategy) {
  return guarded(handle, [&] {
    handle->session.set_strategy(
        semsplit::strategy_from_name(require_cstr(strategy, "strategy")));
  });
}

int semsplit_outsource_file(semsplit_t* handle, const char* doc_id,
                            const char* file_path, char** receipt_json) {
  return guarded(handle, [&] {
    semsplit::OutsourceReceipt receipt = handle->session.outsource_file(
        doc_id == nullptr ? "" : doc_id,
        require_cstr(file_path, "file_path"));
    if (receipt_json != nullptr) {
      json out;
      out["doc_id"] = receipt.doc_id;
      out["identifier_occurrences"] = receipt.identifier_occurrences;
      out["qid_occurrences"] = receipt.qid_occurrences;
      out["content_terms"] = receipt.content_terms;
      out["chunks_touched"] = receipt.chunks_touched.size();
      *receipt_json = dup_bytes(out.dump());
    }
  });
}

int semsplit_retrieve(semsplit_t* handle, const char* doc_id, char** text,
                      size_t* length) {
  return guarded(handle, [&] {
    std::string document =
        handle->session.retrieve(require_cstr(doc_id, "doc_id"));
    if (length != nullptr) *length = document.size();
    if (text != nullptr) *text = dup_bytes(document);
  });
}

int semsplit_search(semsplit_t* handle, const char* expr,
                    char** doc_ids_json) {
  return guarded(handle, [&] {
    semsplit::QueryResult result =
        handle->session.search(require_cstr(expr, "expr"));
    if (doc_ids_json != nullptr) {
      *doc_ids_json = dup_bytes(json(result.matching_docs()).dump());
    }
  });
}

int semsplit_update(semsplit_t* handle, const char* doc_id, const char* op,
                    size_t position, const char* text) {
  return guarded(handle, [&] {
    handle->session.update(
        require_cstr(doc_id, "doc_id"),
        semsplit::update_op_from_name(require_cstr(op, "op")), position,
        text == nullptr ? "" : text);
  });
}

int semsplit_eval(semsplit_t* handle, const char* experiment_path,
                  const char* format, char** report) {
  return guarded(handle, [&] {
    std::string rendered = handle->session.eval(
        require_cstr(experiment_path, "experiment_path"),
        semsplit::report_format_from_name(require_cstr(format, "format")));
    if (report != nullptr) *report = dup_bytes(rendered);
  });
}

int semsplit_status_report(semsplit_t* handle, char** report_json) {
  return guarded(handle, [&] {
    semsplit::StatusReport report = handle->session.status();
    if (report_json != nullptr) {
      json out;
      out["document_count"] = report.document_count;
      json locations = json::array();
      for (const semsplit::LocationStatus& loc : report.locations) {
        locations.push_back({{"location_id", loc.location_id},
                             {"item_count", loc.item_count}});
      }
      out["locations"] = std::move(locations);
      json chunks = json::array();
      for (const semsplit::ChunkStatus& chunk : report.chunks) {
        chunks.push_back({{"chunk_id", chunk.chunk_id},
                          {"location_id", chunk.location_id},
                          {"live_entries", chunk.live_entries},
                          {"tombstones", chunk.tombstones},
                          {"disclosure_score", chunk.disclosure_score}});
      }
      out["chunks"] = std::move(chunks);
      *report_json = dup_bytes(out.dump());
    }
  });
}

void semsplit_free(char* buffer) { std::free(buffer); }

}  // extern "C"
