#ifndef MCLNER_H
#define MCLNER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  MCL_STATUS_OK = 0,
  MCL_STATUS_NULL_POINTER = 1,
  MCL_STATUS_INVALID_UTF8 = 2,
  MCL_STATUS_INVALID_ARGUMENT = 3,
  MCL_STATUS_IO = 4,
  MCL_STATUS_PARSE = 5,
  MCL_STATUS_ARCHIVE = 6,
  MCL_STATUS_ARCHIVE_VERSION = 7,
  MCL_STATUS_ALIGNMENT = 8,
  MCL_STATUS_INVALID_TAG = 9,
  MCL_STATUS_SHAPE = 10,
  MCL_STATUS_PANIC = 11,
  MCL_STATUS_OTHER = 12,
} MclStatus;

/**
 * A loaded model. Opaque to C callers.
 */
typedef struct MclModel MclModel;

/**
 * Chunk-level scores in percent plus token accuracy.
 */
typedef struct {
  double precision;
  double recall;
  double f1;
  double accuracy;
  size_t gold_chunks;
  size_t predicted_chunks;
  size_t correct_chunks;
} MclScores;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a model archive. On success `*out` receives a handle that must be
 * released with [`mcl_model_free`].
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
MclStatus mcl_model_load(const char *path, MclModel **out);

/**
 * Releases a model handle. Passing NULL is a no-op.
 *
 * # Safety
 * `model` must be NULL or a handle from [`mcl_model_load`] not yet freed.
 */
void mcl_model_free(MclModel *model);

/**
 * Number of tags the model predicts. Tag ids run from 0 to this value
 * minus one; id 0 is `O`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
MclStatus mcl_model_num_tags(const MclModel *model, size_t *out);

/**
 * Name of tag `id`. The string is owned by the model and lives until the
 * handle is freed.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
MclStatus mcl_model_tag_name(const MclModel *model, size_t id, const char **out);

/**
 * Tags one sentence of `len` tokens and writes tag ids into `out_tags`.
 * `roots` and `morphs` may be NULL; missing roots default to the
 * lowercased surface and missing morphology bits to all zeros. Morphology
 * strings are six characters of `0`/`1`.
 *
 * # Safety
 * `surfaces` (and `roots`/`morphs` when non-NULL) must point to `len`
 * NUL-terminated strings; `out_tags` must have room for `len` values.
 */
MclStatus mcl_model_tag(const MclModel *model,
                        const char *const *surfaces,
                        const char *const *roots,
                        const char *const *morphs,
                        size_t len,
                        size_t *out_tags);

/**
 * Scores a predicted file against a gold corpus with chunk-level
 * semantics. The gold file has columns `surface root morph tag` (root and
 * morph optional); the predicted tag is the last column of each line.
 *
 * # Safety
 * `gold` and `predicted` must be NUL-terminated; `out` a valid pointer.
 */
MclStatus mcl_evaluate_files(const char *gold, const char *predicted, MclScores *out);

/**
 * Message for the last failure on this thread, or NULL if the last call
 * succeeded. Valid until the next call into the library on this thread.
 */
const char *mcl_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mcl_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MCLNER_H */
