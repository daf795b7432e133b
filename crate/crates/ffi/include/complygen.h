/* C interface for the complygen toolkit. Generated by cbindgen; do not edit. */

#ifndef COMPLYGEN_H
#define COMPLYGEN_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes. Non-zero codes leave a message in
 * `cg_last_error_message`.
 */
typedef enum CgStatus {
  CG_STATUS_OK = 0,
  CG_STATUS_PARSE_ERROR = 1,
  CG_STATUS_VALIDATION_ERROR = 2,
  CG_STATUS_EXHAUSTED = 3,
  CG_STATUS_INVALID_ARGUMENT = 4,
  CG_STATUS_UTF8_ERROR = 5,
} CgStatus;

typedef struct CgOracleSet CgOracleSet;

typedef struct CgToolset CgToolset;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static string; do not free.
 */
const char *cg_version(void);

/**
 * Message for the most recent failure on this thread. Caller frees the
 * returned string with `cg_string_free`. Empty string when no error.
 */
char *cg_last_error_message(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be NULL or a pointer previously returned by this library and
 * not yet freed.
 */
void cg_string_free(char *s);

/**
 * Parses and validates a schema document.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string; `out` must be a valid
 * pointer.
 */
enum CgStatus cg_toolset_parse(const char *text, struct CgToolset **out);

/**
 * # Safety
 * `ts` must be NULL or a pointer from `cg_toolset_parse`, freed once.
 */
void cg_toolset_free(struct CgToolset *ts);

/**
 * Number of APIs; 0 when `ts` is NULL.
 *
 * # Safety
 * `ts` must be NULL or a valid toolset handle.
 */
uint32_t cg_toolset_api_count(const struct CgToolset *ts);

/**
 * Number of safety-critical APIs; 0 when `ts` is NULL.
 *
 * # Safety
 * `ts` must be NULL or a valid toolset handle.
 */
uint32_t cg_toolset_safety_api_count(const struct CgToolset *ts);

/**
 * Renders the toolset in canonical schema text.
 *
 * # Safety
 * Pointer contracts as above.
 */
enum CgStatus cg_toolset_render(const struct CgToolset *ts, char **out);

/**
 * Parses an oracle file (JSONL) and validates every oracle's signature
 * against the toolset. Rejections are `ValidationError`s naming the
 * unknown atoms.
 *
 * # Safety
 * Pointer contracts as above.
 */
enum CgStatus cg_oracles_parse(const char *text,
                               const struct CgToolset *ts,
                               struct CgOracleSet **out);

/**
 * # Safety
 * `os` must be NULL or a pointer from `cg_oracles_parse`, freed once.
 */
void cg_oracles_free(struct CgOracleSet *os);

/**
 * Number of oracles; 0 when `os` is NULL.
 *
 * # Safety
 * `os` must be NULL or a valid oracle-set handle.
 */
uint32_t cg_oracles_count(const struct CgOracleSet *os);

/**
 * Synthesizes a compliant trace and writes it as trace-file JSON. An
 * unsatisfiable search returns `Exhausted`.
 *
 * # Safety
 * Pointer contracts as above.
 */
enum CgStatus cg_fuzz_trace(const struct CgToolset *ts,
                            const struct CgOracleSet *os,
                            uint32_t target_length,
                            uint64_t seed,
                            uint32_t max_backtracks,
                            uint32_t max_candidates_per_step,
                            bool require_business_action,
                            char **out_trace_json);

/**
 * Removes every safety-critical action from a trace-file JSON document,
 * writing the masked document.
 *
 * # Safety
 * Pointer contracts as above.
 */
enum CgStatus cg_mask_trace(const struct CgToolset *ts,
                            const char *trace_json,
                            char **out_trace_json);

/**
 * True iff every oracle in the set holds over the trace.
 *
 * # Safety
 * Pointer contracts as above.
 */
enum CgStatus cg_trace_satisfies(const struct CgOracleSet *os, const char *trace_json, bool *out);

/**
 * Grades a candidate call script against a test case (the bundle's JSON
 * record for one case) and writes the outcome as JSON.
 *
 * # Safety
 * Pointer contracts as above.
 */
enum CgStatus cg_evaluate_candidate(const struct CgToolset *ts,
                                    const char *case_json,
                                    const char *candidate_script,
                                    char **out_outcome_json);

/**
 * Computes both coverage metrics over a JSON array of trace-file
 * documents, writing the report as JSON.
 *
 * # Safety
 * Pointer contracts as above.
 */
enum CgStatus cg_coverage_report(const struct CgToolset *ts,
                                 const char *traces_json,
                                 char **out_report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COMPLYGEN_H */
