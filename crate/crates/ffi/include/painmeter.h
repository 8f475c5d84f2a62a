#ifndef PAINMETER_H
#define PAINMETER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PmStatus {
  PM_STATUS_OK = 0,
  PM_STATUS_NULL_POINTER = 1,
  PM_STATUS_INVALID_UTF8 = 2,
  PM_STATUS_FORMAT = 3,
  PM_STATUS_DATA = 4,
  PM_STATUS_MANIFEST = 5,
  PM_STATUS_SHAPE = 6,
  PM_STATUS_USAGE = 7,
  PM_STATUS_LENGTH = 8,
  PM_STATUS_TRAINING = 9,
  PM_STATUS_CHECKPOINT = 10,
  PM_STATUS_IO = 11,
  PM_STATUS_BUFFER_TOO_SMALL = 12,
  PM_STATUS_PANIC = 13,
} PmStatus;

/**
 * A trained or freshly initialized network.
 */
typedef struct PmModel PmModel;

/**
 * One loaded recording.
 */
typedef struct PmRecording PmRecording;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null if none. The
 * pointer stays valid until the next failing call on the same thread.
 */
const char *pm_last_error_message(void);

/**
 * Static, null-terminated version string.
 */
const char *pm_version(void);

/**
 * Loads a checkpoint file into a new model handle.
 *
 * # Safety
 * `path` must be a null-terminated string; `out` must be writable.
 */
enum PmStatus pm_model_load(const char *path, struct PmModel **out);

/**
 * Creates a randomly initialized default CNN.
 *
 * # Safety
 * `out` must be writable.
 */
enum PmStatus pm_model_new_cnn(size_t channels,
                               size_t seq_len,
                               size_t num_categories,
                               uint64_t seed,
                               struct PmModel **out);

/**
 * Writes the model to a checkpoint file.
 *
 * # Safety
 * `model` must be a live handle; `path` a null-terminated string.
 */
enum PmStatus pm_model_save(const struct PmModel *model, const char *path);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not be used afterwards.
 */
void pm_model_free(struct PmModel *model);

/**
 * Input shape and category count of a model.
 *
 * # Safety
 * `model` must be a live handle; the out pointers writable.
 */
enum PmStatus pm_model_shape(const struct PmModel *model,
                             size_t *channels,
                             size_t *seq_len,
                             size_t *num_categories);

/**
 * Softmax probabilities for one `channels × seq_len` slice.
 *
 * # Safety
 * `values` must hold `rows * cols` doubles and `probs_out` `probs_len`.
 */
enum PmStatus pm_model_predict(const struct PmModel *model,
                               const double *values,
                               size_t rows,
                               size_t cols,
                               double *probs_out,
                               size_t probs_len);

/**
 * Plurality vote over `k` random slices of a longer unit. Writes the vote
 * count per category and the winning category (lowest index on ties).
 *
 * # Safety
 * `values` must hold `rows * cols` doubles, `counts_out` `counts_len`
 * entries, and `category_out` must be writable.
 */
enum PmStatus pm_model_consensus(const struct PmModel *model,
                                 const double *values,
                                 size_t rows,
                                 size_t cols,
                                 size_t k,
                                 uint64_t seed,
                                 size_t *counts_out,
                                 size_t counts_len,
                                 size_t *category_out);

/**
 * Distance-weighted ordinal cross-entropy of a probability vector.
 *
 * # Safety
 * `probs` must hold `num_categories` doubles; `loss_out` must be writable.
 */
enum PmStatus pm_ordinal_loss(const double *probs,
                              size_t num_categories,
                              size_t true_index,
                              double *loss_out);

/**
 * Index of the largest count, lowest index on ties.
 *
 * # Safety
 * `counts` must hold `len` entries; `out` must be writable.
 */
enum PmStatus pm_plurality(const size_t *counts, size_t len, size_t *out);

/**
 * Loads a recording file.
 *
 * # Safety
 * `path` must be a null-terminated string; `out` must be writable.
 */
enum PmStatus pm_recording_load(const char *path, struct PmRecording **out);

/**
 * Channel count, timestep count and pain score of a recording.
 *
 * # Safety
 * `rec` must be a live handle; the out pointers writable.
 */
enum PmStatus pm_recording_info(const struct PmRecording *rec,
                                size_t *channels,
                                size_t *timesteps,
                                uint8_t *pain_score);

/**
 * Row-major channel × timestep values, owned by the handle. Null for a
 * null handle.
 *
 * # Safety
 * `rec` must be a live handle or null.
 */
const double *pm_recording_values(const struct PmRecording *rec);

/**
 * Releases a recording handle. Null is ignored.
 *
 * # Safety
 * `rec` must come from this library and not be used afterwards.
 */
void pm_recording_free(struct PmRecording *rec);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PAINMETER_H */
