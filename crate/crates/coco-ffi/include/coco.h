#ifndef COCO_H
#define COCO_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>
typedef struct CocoExperiment CocoExperiment;

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum CocoStatus {
  COCO_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  COCO_STATUS_NULL_POINTER = 1,
  /**
   * The config failed to parse or violates an invariant.
   */
  COCO_STATUS_INVALID_CONFIG = 2,
  /**
   * A trajectory left the stability region.
   */
  COCO_STATUS_DIVERGED = 3,
  /**
   * Any other runtime failure; see `coco_last_error`.
   */
  COCO_STATUS_RUNTIME_ERROR = 4,
} CocoStatus;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the most recent error on this thread, or null. The caller owns
 * the returned string.
 */
char *coco_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must have been returned by this library and not freed before.
 */
void coco_string_free(char *s);

/**
 * Parses a JSON experiment config into an opaque handle.
 *
 * # Safety
 * `json` must be a valid NUL-terminated string; `out` must be a valid
 * pointer.
 */
enum CocoStatus coco_experiment_parse(const char *json, CocoExperiment **out);

/**
 * Frees a handle returned by `coco_experiment_parse`. Null is ignored.
 *
 * # Safety
 * `handle` must come from `coco_experiment_parse` and not be freed twice.
 */
void coco_experiment_free(CocoExperiment *handle);

/**
 * Validates the config. On any violation returns `InvalidConfig` and, when
 * `diagnostics_out` is non-null, a JSON array of messages.
 *
 * # Safety
 * `handle` must be a live handle; `diagnostics_out` may be null.
 */
enum CocoStatus coco_experiment_validate(const CocoExperiment *handle, char **diagnostics_out);

/**
 * Runs the experiment, writing artifacts to `out_dir` with `parallelism`
 * worker threads (0 means one per available core).
 *
 * # Safety
 * `handle` must be a live handle and `out_dir` a valid NUL-terminated path.
 */
enum CocoStatus coco_experiment_run(const CocoExperiment *handle,
                                    const char *out_dir,
                                    uintptr_t parallelism);

/**
 * Evaluates the theoretical constants and returns them as a JSON string.
 *
 * # Safety
 * `handle` must be a live handle; `json_out` must be a valid pointer.
 */
enum CocoStatus coco_experiment_constants_json(const CocoExperiment *handle, char **json_out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* COCO_H */
