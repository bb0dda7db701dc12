/* SPDX-License-Identifier: Apache-2.0 */

#ifndef MINIMALIST_H
#define MINIMALIST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Inference engine selector.
 */
typedef enum MgEngine {
  /**
   * Quantized minGRU arithmetic.
   */
  MG_ENGINE_IDEAL = 0,
  /**
   * Charge-domain capacitor simulation.
   */
  MG_ENGINE_CIRCUIT = 1,
} MgEngine;

/**
 * Result of every fallible call.
 */
typedef enum MgStatus {
  MG_STATUS_OK = 0,
  /**
   * A required pointer argument was NULL.
   */
  MG_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  MG_STATUS_INVALID_UTF8 = 2,
  /**
   * The model file could not be read.
   */
  MG_STATUS_IO = 3,
  /**
   * The model text is not valid JSON or has unknown fields.
   */
  MG_STATUS_PARSE = 4,
  /**
   * The model is well-formed but inconsistent (codes, dimensions, version).
   */
  MG_STATUS_INVALID_MODEL = 5,
  /**
   * Input length does not match `steps * n_in`, or `steps` is zero.
   */
  MG_STATUS_INVALID_INPUT = 6,
  /**
   * An output buffer is too small.
   */
  MG_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * Unknown engine selector.
   */
  MG_STATUS_INVALID_ENGINE = 8,
  /**
   * The circuit engine rejected the model or failed a consistency check.
   */
  MG_STATUS_CIRCUIT = 9,
  /**
   * Internal failure; the handle should be freed.
   */
  MG_STATUS_INTERNAL = 10,
} MgStatus;

/**
 * Opaque model handle.
 */
typedef struct MgModel MgModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Loads a model file and stores a new handle in `*out`.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MgStatus mg_model_load_file(const char *path, struct MgModel **out);

/**
 * Parses model JSON and stores a new handle in `*out`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum MgStatus mg_model_load_json(const char *json, struct MgModel **out);

/**
 * Releases a handle. NULL is ignored.
 *
 * # Safety
 * `model` must come from a load call and not have been freed.
 */
void mg_model_free(struct MgModel *model);

/**
 * Input width of the first layer; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t mg_model_n_in(const struct MgModel *model);

/**
 * Number of readout units (logits); 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t mg_model_n_out(const struct MgModel *model);

/**
 * Number of layers; 0 for NULL.
 *
 * # Safety
 * `model` must be NULL or a live handle.
 */
size_t mg_model_n_layers(const struct MgModel *model);

/**
 * Writes the canonical model JSON plus a NUL into `buf`.
 *
 * `*needed` receives the required size including the NUL, also when the
 * buffer is too small. `buf` may be NULL when `cap` is 0.
 *
 * # Safety
 * `model` must be a live handle, `buf` valid for `cap` bytes, `needed` valid.
 */
enum MgStatus mg_model_to_json(const struct MgModel *model, char *buf, size_t cap, size_t *needed);

/**
 * Runs one sequence.
 *
 * `inputs` holds `steps * n_in` bytes, step-major; any nonzero byte is an
 * active input. `logits` receives `n_out` values and must hold at least
 * `logits_len` doubles. `class_out` may be NULL. `engine` is an
 * [`MgEngine`] value.
 *
 * # Safety
 * `model` must be a live handle not used concurrently, `inputs` valid for
 * `steps * n_in` bytes and `logits` valid for `logits_len` doubles.
 */
enum MgStatus mg_forward(struct MgModel *model,
                         uint32_t engine,
                         const uint8_t *inputs,
                         size_t steps,
                         double *logits,
                         size_t logits_len,
                         size_t *class_out);

/**
 * Message of the last failed call on this thread, or an empty string.
 *
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *mg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *mg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MINIMALIST_H */
