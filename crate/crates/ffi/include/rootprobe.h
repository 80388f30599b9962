#ifndef ROOTPROBE_H
#define ROOTPROBE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum RpStatus {
  RP_STATUS_OK = 0,
  RP_STATUS_NULL_POINTER = 1,
  RP_STATUS_INVALID_UTF8 = 2,
  RP_STATUS_INVALID_ARGUMENT = 3,
  RP_STATUS_MODEL = 4,
  RP_STATUS_PROTOCOL = 5,
  RP_STATUS_TARGET_NOT_FOUND = 6,
  RP_STATUS_IO = 7,
  RP_STATUS_INTERNAL = 8,
} RpStatus;

/**
 * Opaque answerer handle.
 */
typedef struct RpAnswerer RpAnswerer;

/**
 * Opaque reduction trace with its root question.
 */
typedef struct RpTrace RpTrace;

/**
 * Surrogate and reduction settings for [`rp_analyze`].
 */
typedef struct RpAnalysisConfig {
  size_t n_samples;
  double kernel_width;
  double ridge_alpha;
  uint64_t seed;
  bool recompute_coefficients;
} RpAnalysisConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Defaults: 1000 samples, kernel width 25, ridge alpha 1, seed 0, frozen order.
 */
struct RpAnalysisConfig rp_analysis_config_default(void);

/**
 * Message for the last failed call on this thread, or NULL. The pointer is
 * valid until the next rootprobe call on the same thread.
 */
const char *rp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *rp_version(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, freed only once.
 */
void rp_string_free(char *s);

/**
 * Creates an answerer from a model spec: `builtin`,
 * `oracle:<keyword>:<target>`, `scripted:<path>` or `http:<url>`.
 *
 * # Safety
 * `spec` must be a NUL-terminated string; `out` must be writable.
 */
enum RpStatus rp_answerer_new(const char *spec, size_t max_inflight, struct RpAnswerer **out);

/**
 * # Safety
 * `answerer` must be NULL or a handle from [`rp_answerer_new`], freed once.
 */
void rp_answerer_free(struct RpAnswerer *answerer);

/**
 * Health check; always OK for local answerers.
 *
 * # Safety
 * `answerer` must be a live handle.
 */
enum RpStatus rp_answerer_health(const struct RpAnswerer *answerer);

/**
 * Asks one question and writes the validated prediction as JSON
 * (`answer_text`, `start_token`, `end_token`, `context_tokens`,
 * `start_distribution`) to `*out_json`.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated.
 */
enum RpStatus rp_predict_json(const struct RpAnswerer *answerer,
                              const char *question,
                              const char *context,
                              char **out_json);

/**
 * Explains and reduces one question. `answer_start` is the character offset
 * of `answer` in `context`, or -1 when unknown.
 *
 * # Safety
 * Pointers must be valid; strings NUL-terminated; `config` may be NULL for
 * defaults.
 */
enum RpStatus rp_analyze(const struct RpAnswerer *answerer,
                         const char *id,
                         const char *question,
                         const char *context,
                         const char *answer,
                         int64_t answer_start,
                         const struct RpAnalysisConfig *config,
                         struct RpTrace **out);

/**
 * # Safety
 * `trace` must be NULL or a handle from [`rp_analyze`], freed once.
 */
void rp_trace_free(struct RpTrace *trace);

/**
 * Number of words in the original question; 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
size_t rp_trace_word_count(const struct RpTrace *trace);

/**
 * Number of words in the root question; 0 for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
size_t rp_trace_root_word_count(const struct RpTrace *trace);

/**
 * Fraction of question words removed in the root question; NaN for NULL.
 *
 * # Safety
 * `trace` must be NULL or a live handle.
 */
double rp_trace_percent_removed(const struct RpTrace *trace);

/**
 * Copies up to `len` per-word coefficients into `buf` and returns the total
 * number of coefficients, so a call with `len = 0` sizes the buffer.
 *
 * # Safety
 * `buf` must have room for `len` doubles (may be NULL when `len` is 0).
 */
size_t rp_trace_coefficients(const struct RpTrace *trace, double *buf, size_t len);

/**
 * Root question text (words joined by single spaces).
 *
 * # Safety
 * `trace` must be a live handle; `out` writable.
 */
enum RpStatus rp_trace_root_text(const struct RpTrace *trace, char **out);

/**
 * Full trace as JSON, the same document the CLI writes per example.
 *
 * # Safety
 * `trace` must be a live handle; `out` writable.
 */
enum RpStatus rp_trace_to_json(const struct RpTrace *trace, char **out);

/**
 * Whether `answer` counts as a correct answer for `truth`.
 *
 * # Safety
 * Strings must be NUL-terminated; `out` writable.
 */
enum RpStatus rp_answer_matches(const char *answer, const char *truth, bool *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ROOTPROBE_H */
