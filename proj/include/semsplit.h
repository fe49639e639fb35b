/* C interface to the splitting proxy. All functions return a status code
 * (0 = success; names via semsplit_status_name). Strings returned through
 * char** out-parameters are heap copies owned by the caller: release them
 * with semsplit_free. Structured results come back as JSON text.
 */
#ifndef SEMSPLIT_H
#define SEMSPLIT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef struct semsplit_session semsplit_t;

/* Status codes. Stable; semsplit_status_name returns the matching name. */
#define SEMSPLIT_OK 0
#define SEMSPLIT_CONFIG_ERROR 1
#define SEMSPLIT_EMPTY_CORPUS 2
#define SEMSPLIT_UNKNOWN_ENTITY 3
#define SEMSPLIT_INVALID_ENCODING 4
#define SEMSPLIT_COMBINATION_BUDGET_EXCEEDED 5
#define SEMSPLIT_ALLOCATION_IMPOSSIBLE 6
#define SEMSPLIT_POOL_EXHAUSTED 7
#define SEMSPLIT_IO_FAILURE 8
#define SEMSPLIT_UNKNOWN_HANDLE 9
#define SEMSPLIT_OFFSET_OUT_OF_RANGE 10
#define SEMSPLIT_UNKNOWN_DOC 11
#define SEMSPLIT_INVALID_POSITION 12
#define SEMSPLIT_MISSING_ITEM 13
#define SEMSPLIT_METADATA_CORRUPT 14
#define SEMSPLIT_SCHEMA_VERSION_MISMATCH 15
#define SEMSPLIT_PARSE_ERROR 16
#define SEMSPLIT_TOO_LARGE 17
#define SEMSPLIT_INTERNAL_ERROR 18

/* Loads the JSON config at config_path and prepares a session. Heavy state
 * (index, pool, metadata) is assembled lazily by the first operation.
 * Returns NULL on failure with *status set and, when error_message is
 * non-NULL, a heap-allocated description stored into it. On success
 * *status is 0 and *error_message is NULL. */
semsplit_t* semsplit_open(const char* config_path, int* status,
                          char** error_message);
void semsplit_close(semsplit_t* handle);

/* Message of the most recent failing call on this handle; empty string if
 * the last call succeeded. Valid until the next call on the handle. */
const char* semsplit_last_error(const semsplit_t* handle);

/* Stable name for a status code, e.g. 0 -> "OK", 1 -> "CONFIG_ERROR". */
const char* semsplit_status_name(int status);

/* Rebuilds the corpus index from the configured corpus and saves it.
 * documents/vocabulary may be NULL. */
int semsplit_index_build(semsplit_t* handle, unsigned long long* documents,
                         size_t* vocabulary);

/* Overrides the configured splitting strategy (naive|plain|heuristic).
 * Only valid before the first operation that assembles the proxy. */
int semsplit_set_strategy(semsplit_t* handle, const char* strategy);

/* Outsources the document in file_path under doc_id (empty or NULL doc_id
 * auto-assigns one). On success *receipt_json receives an object with
 * doc_id, identifier_occurrences, qid_occurrences, content_terms, and
 * chunks_touched. */
int semsplit_outsource_file(semsplit_t* handle, const char* doc_id,
                            const char* file_path, char** receipt_json);

/* Byte-exact reconstruction. *text receives length bytes plus a trailing
 * NUL (documents may legally contain NUL bytes; trust length, not strlen).
 * length may be NULL. */
int semsplit_retrieve(semsplit_t* handle, const char* doc_id, char** text,
                      size_t* length);

/* Boolean keyword query (AND/OR/NOT, parentheses, quoted phrases). On
 * success *doc_ids_json receives a sorted JSON array of matching ids. */
int semsplit_search(semsplit_t* handle, const char* expr,
                    char** doc_ids_json);

/* Surgical edit: op is delete|replace|insert, position indexes the
 * document's content terms, text is the new term (ignored for delete,
 * may be NULL then). */
int semsplit_update(semsplit_t* handle, const char* doc_id, const char* op,
                    size_t position, const char* text);

/* Runs the experiment file and renders the report (format csv|md). */
int semsplit_eval(semsplit_t* handle, const char* experiment_path,
                  const char* format, char** report);

/* Pool occupancy, chunk inventory, and document count as JSON. */
int semsplit_status_report(semsplit_t* handle, char** report_json);

/* Releases any buffer returned through a char** out-parameter. */
void semsplit_free(char* buffer);

#ifdef __cplusplus
}
#endif

#endif /* SEMSPLIT_H */
