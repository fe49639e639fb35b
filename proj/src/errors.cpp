#include "semsplit/errors.hpp"

namespace semsplit {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::ok:
      return "OK";
    case ErrorCode::config_error:
      return "CONFIG_ERROR";
    case ErrorCode::empty_corpus:
      return "EMPTY_CORPUS";
    case ErrorCode::unknown_entity:
      return "UNKNOWN_ENTITY";
    case ErrorCode::invalid_encoding:
      return "INVALID_ENCODING";
    case ErrorCode::combination_budget_exceeded:
      return "COMBINATION_BUDGET_EXCEEDED";
    case ErrorCode::allocation_impossible:
      return "ALLOCATION_IMPOSSIBLE";
    case ErrorCode::pool_exhausted:
      return "POOL_EXHAUSTED";
    case ErrorCode::io_failure:
      return "IO_FAILURE";
    case ErrorCode::unknown_handle:
      return "UNKNOWN_HANDLE";
    case ErrorCode::offset_out_of_range:
      return "OFFSET_OUT_OF_RANGE";
    case ErrorCode::unknown_doc:
      return "UNKNOWN_DOC";
    case ErrorCode::invalid_position:
      return "INVALID_POSITION";
    case ErrorCode::missing_item:
      return "MISSING_ITEM";
    case ErrorCode::metadata_corrupt:
      return "METADATA_CORRUPT";
    case ErrorCode::schema_version_mismatch:
      return "SCHEMA_VERSION_MISMATCH";
    case ErrorCode::parse_error:
      return "PARSE_ERROR";
    case ErrorCode::too_large:
      return "TOO_LARGE";
    case ErrorCode::internal_error:
      return "INTERNAL_ERROR";
  }
  return "INTERNAL_ERROR";
}

}  // namespace semsplit
