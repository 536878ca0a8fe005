#ifndef RGNET_H
#define RGNET_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result codes shared by every function.
typedef enum RgStatus {
  RG_STATUS_OK = 0,
  RG_STATUS_NULL_POINTER = 1,
  RG_STATUS_INVALID_UTF8 = 2,
  RG_STATUS_IO = 3,
  RG_STATUS_PARSE = 4,
  RG_STATUS_INVALID_ARGUMENT = 5,
  RG_STATUS_SHAPE_MISMATCH = 6,
  RG_STATUS_MISSING_ARTIFACT = 7,
  RG_STATUS_NUMERIC = 8,
  RG_STATUS_UNSUPPORTED = 9,
  RG_STATUS_PANIC = 10,
} RgStatus;

// Model family of a loaded checkpoint.
typedef enum RgModelKind {
  RG_MODEL_KIND_RGNET = 0,
  RG_MODEL_KIND_NEWTONIAN = 1,
  RG_MODEL_KIND_LOGREG = 2,
} RgModelKind;

// A trained model loaded from a checkpoint.
typedef struct RgModel RgModel;

// A pipeline bound to one configuration.
typedef struct RgPipeline RgPipeline;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or null. The pointer is
// valid until the next call into this library on the same thread.
const char *rg_last_error(void);

// Library version as a static NUL-terminated string.
const char *rg_version(void);

// Loads a checkpoint written by the `train` stage.
//
// # Safety
// `path` must be a NUL-terminated string and `out` a writable pointer.
enum RgStatus rg_model_load(const char *path, struct RgModel **out);

// Releases a model. Null is ignored.
//
// # Safety
// `model` must come from [`rg_model_load`] and not be used afterwards.
void rg_model_free(struct RgModel *model);

// Model family and cluster count of a loaded model.
//
// # Safety
// `model` must be a live handle; `kind` and `clusters` writable pointers.
enum RgStatus rg_model_info(const struct RgModel *model, enum RgModelKind *kind, size_t *clusters);

// Temporal prediction from a post and the windows observed so far.
//
// `windows` holds `n_windows` rows of `window_width` values, `centers`
// holds `n_centers` rows of `dim` values, and `y1` receives `n_centers`
// probabilities. `tau` is the time coordinate of the step.
//
// # Safety
// Every pointer must reference at least the number of values stated by its
// companion lengths.
enum RgStatus rg_predict_temporal(const struct RgModel *model,
                                  const double *post,
                                  size_t post_len,
                                  const double *windows,
                                  size_t n_windows,
                                  size_t window_width,
                                  double tau,
                                  const double *centers,
                                  size_t n_centers,
                                  size_t dim,
                                  double *y1,
                                  double *y2);

// One-shot attraction probability of a post; `attract` receives 1 when
// `y3 > 0.5`.
//
// # Safety
// As for [`rg_predict_temporal`].
enum RgStatus rg_predict_nontemporal(const struct RgModel *model,
                                     const double *post,
                                     size_t post_len,
                                     const double *centers,
                                     size_t n_centers,
                                     size_t dim,
                                     double *y3,
                                     int32_t *attract);

// Distance under the diagonal metric whose inverse is `g_inv`.
//
// # Safety
// `g_inv`, `x` and `y` must each hold `len` values; `out` must be writable.
enum RgStatus rg_metric_distance(const double *g_inv,
                                 const double *x,
                                 const double *y,
                                 size_t len,
                                 double *out);

// Creates a pipeline from a JSON configuration object.
//
// # Safety
// `config_json` must be NUL-terminated; `out` writable.
enum RgStatus rg_pipeline_new(const char *config_json, struct RgPipeline **out);

// Runs one stage by name (`ingest`, `train`, `synth`, ...).
//
// # Safety
// `pipeline` must be a live handle and `stage` NUL-terminated.
enum RgStatus rg_pipeline_run_stage(const struct RgPipeline *pipeline, const char *stage);

// Releases a pipeline. Null is ignored.
//
// # Safety
// `pipeline` must come from [`rg_pipeline_new`] and not be used afterwards.
void rg_pipeline_free(struct RgPipeline *pipeline);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RGNET_H */
