#ifndef BEAMLAB_H
#define BEAMLAB_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes shared by every fallible entry point.
 */
typedef enum BeamlabStatus {
  BEAMLAB_STATUS_OK = 0,
  /**
   * Null pointer, wrong length or malformed UTF-8.
   */
  BEAMLAB_STATUS_INVALID_ARGUMENT = 1,
  /**
   * Configuration rejected by validation.
   */
  BEAMLAB_STATUS_CONFIG = 2,
  /**
   * Solver failure or resolvent pole.
   */
  BEAMLAB_STATUS_NUMERICAL = 3,
  /**
   * A Rust panic was caught at the boundary.
   */
  BEAMLAB_STATUS_PANIC = 4,
} BeamlabStatus;

/**
 * Opaque discretized beam.
 */
typedef struct BeamlabSystem BeamlabSystem;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Builds the discretization described by a run-config JSON document
 * (`NULL` selects the desk defaults) and stores a new handle in `*out`.
 *
 * # Safety
 * `config_json` is `NULL` or a NUL-terminated string; `out` is writable.
 */
enum BeamlabStatus beamlab_system_new(const char *config_json, struct BeamlabSystem **out);

/**
 * Releases a handle. `NULL` is ignored.
 *
 * # Safety
 * `sys` is `NULL` or a handle from [`beamlab_system_new`] not yet freed.
 */
void beamlab_system_free(struct BeamlabSystem *sys);

/**
 * Length of a state vector, `2 * n_q`.
 *
 * # Safety
 * `sys` is a live handle; `out` is writable.
 */
enum BeamlabStatus beamlab_system_state_dim(const struct BeamlabSystem *sys, size_t *out);

/**
 * Discrete energy `E(U)`.
 *
 * # Safety
 * `sys` is a live handle; `state` points to `len` doubles; `out` is writable.
 */
enum BeamlabStatus beamlab_energy(const struct BeamlabSystem *sys,
                                  const double *state,
                                  size_t len,
                                  double *out);

/**
 * Instantaneous energy loss rate `p^T D p`.
 *
 * # Safety
 * As for [`beamlab_energy`].
 */
enum BeamlabStatus beamlab_dissipation_rate(const struct BeamlabSystem *sys,
                                            const double *state,
                                            size_t len,
                                            double *out);

/**
 * Writes `A_h U` into `out` (`len` doubles).
 *
 * # Safety
 * `sys` is a live handle; `state` and `out` each point to `len` doubles.
 */
enum BeamlabStatus beamlab_apply_generator(const struct BeamlabSystem *sys,
                                           const double *state,
                                           size_t len,
                                           double *out);

/**
 * Energy-norm resolvent `|(i lambda - A_h)^{-1}|`. A numerically singular
 * shift yields [`BeamlabStatus::Numerical`].
 *
 * # Safety
 * `sys` is a live handle not used concurrently; `out` is writable.
 */
enum BeamlabStatus beamlab_resolvent_norm(struct BeamlabSystem *sys, double lambda, double *out);

/**
 * Largest real part over the discrete spectrum.
 *
 * # Safety
 * `sys` is a live handle; `out` is writable.
 */
enum BeamlabStatus beamlab_spectral_abscissa(const struct BeamlabSystem *sys, double *out);

/**
 * Stability verdict for a run config as a JSON string in `*out`, to be
 * released with [`beamlab_string_free`].
 *
 * # Safety
 * `config_json` is `NULL` or a NUL-terminated string; `out` is writable.
 */
enum BeamlabStatus beamlab_classify_json(const char *config_json, char **out);

/**
 * Releases a string returned by this library. `NULL` is ignored.
 *
 * # Safety
 * `s` is `NULL` or a string from this library not yet freed.
 */
void beamlab_string_free(char *s);

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into the library on the
 * same thread.
 */
const char *beamlab_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *beamlab_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BEAMLAB_H */
