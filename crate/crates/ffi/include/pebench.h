#ifndef PEBENCH_H
#define PEBENCH_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by every fallible function.
typedef enum PebStatus {
  PEB_STATUS_OK = 0,
  // A required pointer argument was null.
  PEB_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  PEB_STATUS_INVALID_UTF8 = 2,
  // The transcript input violates the record schema.
  PEB_STATUS_PARSE_ERROR = 3,
  // A parameter or configuration value is invalid.
  PEB_STATUS_INVALID_ARGUMENT = 4,
  // A corpus has too few sessions for the requested analysis.
  PEB_STATUS_CORPUS_TOO_SMALL = 5,
  // Reading or writing a file failed.
  PEB_STATUS_IO_ERROR = 6,
  // An internal invariant was violated.
  PEB_STATUS_INTERNAL = 7,
  // The library panicked; the call had no effect.
  PEB_STATUS_PANIC = 8,
} PebStatus;

typedef enum PebCorpusLabel {
  PEB_CORPUS_LABEL_REAL = 0,
  PEB_CORPUS_LABEL_SYNTHETIC = 1,
  PEB_CORPUS_LABEL_OTHER = 2,
} PebCorpusLabel;

typedef enum PebFormat {
  PEB_FORMAT_JSON = 0,
  PEB_FORMAT_CSV = 1,
  PEB_FORMAT_MARKDOWN = 2,
} PebFormat;

// A parsed transcript corpus.
typedef struct PebCorpus PebCorpus;

// A real-versus-synthetic comparison report.
typedef struct PebReport PebReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *peb_version(void);

// Message for the most recent failure on this thread, or null if none.
// The pointer stays valid until the next failing call on this thread.
const char *peb_last_error(void);

// Parse a JSONL transcript held in memory.
//
// # Safety
// `jsonl` must be a NUL-terminated string and `out` valid for writes.
enum PebStatus peb_corpus_parse(const char *jsonl,
                                enum PebCorpusLabel label,
                                struct PebCorpus **out);

// Parse a JSONL transcript file.
//
// # Safety
// `path` must be a NUL-terminated string and `out` valid for writes.
enum PebStatus peb_corpus_read_file(const char *path,
                                    enum PebCorpusLabel label,
                                    struct PebCorpus **out);

// Generate a synthetic corpus. `params_json` holds simulator parameters
// (any subset; missing fields take their defaults) or is null for all defaults.
//
// # Safety
// `params_json` must be null or NUL-terminated; `out` valid for writes.
enum PebStatus peb_simulate(const char *params_json, struct PebCorpus **out);

// Number of sessions in the corpus; 0 for a null handle.
//
// # Safety
// `corpus` must be null or a live handle from this library.
size_t peb_corpus_session_count(const struct PebCorpus *corpus);

// Serialize the corpus back to JSONL.
//
// # Safety
// `corpus` must be a live handle and `out` valid for writes.
enum PebStatus peb_corpus_to_jsonl(const struct PebCorpus *corpus, char **out);

// Release a corpus handle. Null is ignored.
//
// # Safety
// `corpus` must be null or a handle not yet freed.
void peb_corpus_free(struct PebCorpus *corpus);

// Compare a real and a synthetic corpus with the bundled lexicon and rules.
// `config_json` holds report settings (`seed`, `exact_threshold`,
// `importance`, `metrics`) or is null for defaults.
//
// # Safety
// Both corpora must be live handles; `config_json` null or NUL-terminated;
// `out` valid for writes.
enum PebStatus peb_compare(const struct PebCorpus *real,
                           const struct PebCorpus *synth,
                           const char *config_json,
                           struct PebReport **out);

// Render a report as JSON, CSV or Markdown.
//
// # Safety
// `report` must be a live handle and `out` valid for writes.
enum PebStatus peb_report_render(const struct PebReport *report, enum PebFormat format, char **out);

// p-value of the named metric, looked up among system and PE metrics.
// Writes NaN when the metric was skipped.
//
// # Safety
// `report` must be a live handle, `metric` NUL-terminated, `p_out` valid for writes.
enum PebStatus peb_report_p_value(const struct PebReport *report,
                                  const char *metric,
                                  double *p_out);

// Release a report handle. Null is ignored.
//
// # Safety
// `report` must be null or a handle not yet freed.
void peb_report_free(struct PebReport *report);

// Release a string returned by this library. Null is ignored.
//
// # Safety
// `s` must be null or a string from this library not yet freed.
void peb_string_free(char *s);

// Two-sided Mann-Whitney U test of `a` against `b`. Writes U for `a` and the p-value.
//
// # Safety
// `a` and `b` must point to `na` and `nb` doubles; `u_out` and `p_out` valid for writes.
enum PebStatus peb_mann_whitney_u(const double *a,
                                  size_t na,
                                  const double *b,
                                  size_t nb,
                                  double *u_out,
                                  double *p_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PEBENCH_H */
