#ifndef SEDFUSE_H
#define SEDFUSE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum SedfuseStatus {
  SEDFUSE_STATUS_OK = 0,
  SEDFUSE_STATUS_NULL_POINTER = 1,
  SEDFUSE_STATUS_INVALID_STRING = 2,
  SEDFUSE_STATUS_IO = 3,
  SEDFUSE_STATUS_PARSE = 4,
  SEDFUSE_STATUS_VALIDATION = 5,
  SEDFUSE_STATUS_SHAPE = 6,
  SEDFUSE_STATUS_CONFIG = 7,
  SEDFUSE_STATUS_INTERNAL = 8,
} SedfuseStatus;

// Strong labels or detections.
typedef struct SedfuseEvents SedfuseEvents;

// Ordered set of per-clip frame grids.
typedef struct SedfuseGrids SedfuseGrids;

// Class vocabulary handle.
typedef struct SedfuseVocab SedfuseVocab;

// Class-wise fusion weights (models x classes).
typedef struct SedfuseWeights SedfuseWeights;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *sedfuse_version(void);

// Message of the last failed call on this thread, or null. Valid until the
// next failing call on the same thread.
const char *sedfuse_last_error(void);

// # Safety
// `names` must point to `n` NUL-terminated strings; `out` must be writable.
enum SedfuseStatus sedfuse_vocab_new(const char *const *names, size_t n, struct SedfuseVocab **out);

// # Safety
// `vocab` must be null or a handle from `sedfuse_vocab_new`.
void sedfuse_vocab_free(struct SedfuseVocab *vocab);

// # Safety
// `vocab` must be a live handle (null gives 0).
size_t sedfuse_vocab_len(const struct SedfuseVocab *vocab);

// Empty grid set, filled with `sedfuse_grids_push`.
//
// # Safety
// `out` must be writable.
enum SedfuseStatus sedfuse_grids_new(struct SedfuseGrids **out);

// Appends one clip; `values` is row-major `n_frames x n_classes`.
//
// # Safety
// `values` must hold `n_frames * n_classes` doubles.
enum SedfuseStatus sedfuse_grids_push(struct SedfuseGrids *grids,
                                      const char *clip_id,
                                      double hop_seconds,
                                      size_t n_frames,
                                      size_t n_classes,
                                      const double *values);

// Reads a grids.jsonl file, reordering columns to `vocab`.
//
// # Safety
// Pointers must be valid; `out` must be writable.
enum SedfuseStatus sedfuse_grids_read(const char *path,
                                      const struct SedfuseVocab *vocab,
                                      struct SedfuseGrids **out);

// # Safety
// Pointers must be valid.
enum SedfuseStatus sedfuse_grids_write(const struct SedfuseGrids *grids,
                                       const struct SedfuseVocab *vocab,
                                       const char *path);

// Number of clips (null gives 0).
//
// # Safety
// `grids` must be null or a live handle.
size_t sedfuse_grids_len(const struct SedfuseGrids *grids);

// Posterior of `class` at `frame` of clip `clip`.
//
// # Safety
// `grids` must be a live handle; `out` must be writable.
enum SedfuseStatus sedfuse_grids_get(const struct SedfuseGrids *grids,
                                     size_t clip,
                                     size_t frame,
                                     size_t class_,
                                     double *out);

// # Safety
// `grids` must be null or a live handle.
void sedfuse_grids_free(struct SedfuseGrids *grids);

// Reads an events.tsv file.
//
// # Safety
// Pointers must be valid; `out` must be writable.
enum SedfuseStatus sedfuse_events_read(const char *path,
                                       const struct SedfuseVocab *vocab,
                                       struct SedfuseEvents **out);

// # Safety
// Pointers must be valid.
enum SedfuseStatus sedfuse_events_write(const struct SedfuseEvents *events, const char *path);

// # Safety
// `events` must be null or a live handle.
size_t sedfuse_events_len(const struct SedfuseEvents *events);

// # Safety
// `events` must be null or a live handle.
void sedfuse_events_free(struct SedfuseEvents *events);

// Frame-wise mean of `n` aligned grid sets.
//
// # Safety
// `sets` must point to `n` live handles; `out` must be writable.
enum SedfuseStatus sedfuse_fuse_average(const struct SedfuseGrids *const *sets,
                                        size_t n,
                                        struct SedfuseGrids **out);

// `alpha * sed + (1 - alpha) * fsed`.
//
// # Safety
// Pointers must be live handles; `out` must be writable.
enum SedfuseStatus sedfuse_fuse_pair(const struct SedfuseGrids *sed,
                                     const struct SedfuseGrids *fsed,
                                     double alpha,
                                     struct SedfuseGrids **out);

// Softmax weights from an `n_models x n_classes` row-major F1 table.
// `faithful` non-zero keeps the 1/M prefactor.
//
// # Safety
// `f1` must hold `n_models * vocab_len` doubles; `out` must be writable.
enum SedfuseStatus sedfuse_classwise_weights(const double *f1,
                                             size_t n_models,
                                             const struct SedfuseVocab *vocab,
                                             double beta,
                                             int32_t faithful,
                                             struct SedfuseWeights **out);

// # Safety
// `weights` must be a live handle; `out` must be writable.
enum SedfuseStatus sedfuse_weights_get(const struct SedfuseWeights *weights,
                                       size_t model,
                                       size_t class_,
                                       double *out);

// # Safety
// `weights` must be null or a live handle.
void sedfuse_weights_free(struct SedfuseWeights *weights);

// # Safety
// `sets` must point to `n` live handles; other pointers valid.
enum SedfuseStatus sedfuse_fuse_classwise(const struct SedfuseGrids *const *sets,
                                          size_t n,
                                          const struct SedfuseWeights *weights,
                                          struct SedfuseGrids **out);

// Threshold, median filter and extract events with one setting for all classes.
//
// # Safety
// Pointers must be valid; `out` must be writable.
enum SedfuseStatus sedfuse_decode(const struct SedfuseGrids *grids,
                                  const struct SedfuseVocab *vocab,
                                  double threshold,
                                  size_t median_window,
                                  struct SedfuseEvents **out);

// Macro collar-based F1 with the default collars.
//
// # Safety
// Pointers must be valid; `out` must be writable.
enum SedfuseStatus sedfuse_event_f1(const struct SedfuseEvents *reference,
                                    const struct SedfuseEvents *estimated,
                                    const struct SedfuseVocab *vocab,
                                    double *out);

// PSDS with preset 1 or 2 and default decoding (median window 7).
//
// # Safety
// Pointers must be valid; `out` must be writable.
enum SedfuseStatus sedfuse_psds(const struct SedfuseGrids *grids,
                                const struct SedfuseEvents *reference,
                                const struct SedfuseVocab *vocab,
                                int32_t preset,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SEDFUSE_H */
