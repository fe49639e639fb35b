#pragma once

#include <stdexcept>
#include <string>

namespace semsplit {

// Stable error taxonomy. Values double as CLI exit codes and C-API status
// codes, so the numbering must not change between releases.
enum class ErrorCode : int {
  ok = 0,
  config_error = 1,
  empty_corpus = 2,
  unknown_entity = 3,
  invalid_encoding = 4,
  combination_budget_exceeded = 5,
  allocation_impossible = 6,
  pool_exhausted = 7,
  io_failure = 8,
  unknown_handle = 9,
  offset_out_of_range = 10,
  unknown_doc = 11,
  invalid_position = 12,
  missing_item = 13,
  metadata_corrupt = 14,
  schema_version_mismatch = 15,
  parse_error = 16,
  too_large = 17,
  internal_error = 18,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace semsplit
