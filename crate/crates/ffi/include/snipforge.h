#ifndef SNIPFORGE_H
#define SNIPFORGE_H

/* Generated by cbindgen from the snipforge-ffi crate; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes returned by every fallible entry point.
 */
typedef enum SnipforgeStatus {
  SNIPFORGE_STATUS_OK = 0,
  SNIPFORGE_STATUS_NULL_ARGUMENT = 1,
  SNIPFORGE_STATUS_INVALID_UTF8 = 2,
  SNIPFORGE_STATUS_INVALID_ARGUMENT = 3,
  SNIPFORGE_STATUS_IO_ERROR = 4,
  SNIPFORGE_STATUS_PARSE_ERROR = 5,
  SNIPFORGE_STATUS_INTERNAL_ERROR = 6,
} SnipforgeStatus;

/**
 * Classification verdict kinds mirrored across the ABI.
 */
typedef enum SnipforgeClassKind {
  SNIPFORGE_CLASS_KIND_EXACT_TEMPLATE = 0,
  SNIPFORGE_CLASS_KIND_NEW_FUSION = 1,
  SNIPFORGE_CLASS_KIND_GENERATION_ERROR = 2,
} SnipforgeClassKind;

/**
 * Opaque handle over a loaded dataset.
 */
typedef struct SnipforgeDataset SnipforgeDataset;

/**
 * Corpus-level evaluation result.
 */
typedef struct SnipforgeCorpusMeans {
  double rouge_l_input;
  double rouge_3_best;
  double rouge_4_best;
  double conn_rouge_2;
  double conn_rouge_3;
  uint64_t evaluated;
  uint64_t skipped;
  /**
   * False when nothing was evaluated; the five means are zero then.
   */
  bool has_means;
} SnipforgeCorpusMeans;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, or NULL when the
 * last call succeeded. The pointer is borrowed; do not free it, and do not
 * use it after the next failing snipforge call on this thread.
 */
const char *snipforge_last_error(void);

/**
 * Library version as a static string; never freed.
 */
const char *snipforge_version(void);

/**
 * Releases a string returned by this library.
 *
 * # Safety
 * `s` must be a pointer previously returned through an `out` parameter of
 * this library, not yet freed; NULL is ignored.
 */
void snipforge_string_free(char *s);

/**
 * Tokenizes `text` and writes the space-joined canonical form to `out`.
 *
 * # Safety
 * `text` must be a valid NUL-terminated string and `out` a valid pointer.
 */
enum SnipforgeStatus snipforge_tokenize(const char *text, char **out);

/**
 * Longest-common-subsequence recall between the tokenized texts.
 *
 * # Safety
 * Both texts must be valid NUL-terminated strings; `out` must be valid.
 */
enum SnipforgeStatus snipforge_lcs_recall(const char *candidate,
                                          const char *reference,
                                          double *out);

/**
 * Clipped n-gram recall between the tokenized texts; `n` must be >= 1.
 *
 * # Safety
 * Both texts must be valid NUL-terminated strings; `out` must be valid.
 */
enum SnipforgeStatus snipforge_ngram_recall(const char *candidate,
                                            const char *reference,
                                            uint32_t n,
                                            double *out);

/**
 * Removes from `output` every token still available in the `input`
 * multiset and writes the surviving connective tokens to `out`.
 *
 * # Safety
 * Both texts must be valid NUL-terminated strings; `out` must be valid.
 */
enum SnipforgeStatus snipforge_isolate_connective(const char *output,
                                                  const char *input,
                                                  char **out);

/**
 * Renders inventory template `template_id` (1..=7) over a positive and a
 * negative opinion and writes the snippet to `out`.
 *
 * # Safety
 * Both texts must be valid NUL-terminated strings; `out` must be valid.
 */
enum SnipforgeStatus snipforge_render_template(uint8_t template_id,
                                               const char *positive,
                                               const char *negative,
                                               char **out);

/**
 * Loads a dataset record file into an opaque handle.
 *
 * # Safety
 * `path` must be a valid NUL-terminated string; `out` must be valid. The
 * handle must be released with [`snipforge_dataset_free`].
 */
enum SnipforgeStatus snipforge_dataset_open(const char *path, struct SnipforgeDataset **out);

/**
 * Number of instances in the dataset.
 *
 * # Safety
 * `dataset` must be a live handle from [`snipforge_dataset_open`]; `out`
 * must be valid.
 */
enum SnipforgeStatus snipforge_dataset_len(const struct SnipforgeDataset *dataset, uint64_t *out);

/**
 * Releases a dataset handle. NULL is ignored.
 *
 * # Safety
 * `dataset` must come from [`snipforge_dataset_open`] and not be used
 * afterwards.
 */
void snipforge_dataset_free(struct SnipforgeDataset *dataset);

/**
 * Scores a prediction record file against the dataset and writes the
 * corpus means and counts to `out`.
 *
 * # Safety
 * `dataset` must be a live handle; `predictions_path` a valid string;
 * `out` a valid pointer.
 */
enum SnipforgeStatus snipforge_evaluate_file(const struct SnipforgeDataset *dataset,
                                             const char *predictions_path,
                                             struct SnipforgeCorpusMeans *out);

/**
 * Classifies one output against the dataset instance named by
 * `instance_id`. Writes the verdict kind to `kind_out` and its detail (the
 * matched template id, the fused connective, or the error subtype) to
 * `detail_out`.
 *
 * # Safety
 * `dataset` must be a live handle; both strings valid; both out pointers
 * valid. The detail string must be freed with [`snipforge_string_free`].
 */
enum SnipforgeStatus snipforge_classify_output(const struct SnipforgeDataset *dataset,
                                               const char *instance_id,
                                               const char *output,
                                               enum SnipforgeClassKind *kind_out,
                                               char **detail_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SNIPFORGE_H */
