#ifndef TASEP_H
#define TASEP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of an FFI call.
 */
typedef enum TasepStatus {
  /**
   * The call succeeded.
   */
  TasepStatus_Ok = 0,
  /**
   * An argument was outside its documented domain (null pointer,
   * wrong buffer length, bad rate, bad order).
   */
  TasepStatus_InvalidInput = 1,
  /**
   * A solver exhausted its budget without reaching the tolerance.
   */
  TasepStatus_NonConvergence = 2,
  /**
   * A state violated the consistency equations beyond tolerance.
   */
  TasepStatus_Inconsistent = 3,
  /**
   * A reduced linear system was singular.
   */
  TasepStatus_Singular = 4,
  /**
   * A validation suite failed.
   */
  TasepStatus_ValidationFailed = 5,
  /**
   * A panic was caught at the boundary; this is a bug in the library.
   */
  TasepStatus_InternalError = 6,
} TasepStatus;

/**
 * Opaque lattice-parameter handle.
 */
typedef struct TasepParams TasepParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the most recent failure on this thread, NUL-terminated.
 * The pointer stays valid until the next failing call on the same
 * thread. Never null.
 */
const char *tasep_last_error(void);

/**
 * Creates a parameter handle for `n` sites with entry rate `alpha`,
 * exit rate `beta`, and the `n - 1` interior hop rates in `hop_rates`.
 * Returns null on invalid input (see [`tasep_last_error`]).
 *
 * # Safety
 * `hop_rates` must point to `hop_len` readable doubles (it may be null
 * when `hop_len` is 0).
 */
struct TasepParams *tasep_params_new(size_t n,
                                     double alpha,
                                     double beta,
                                     const double *hop_rates,
                                     size_t hop_len);

/**
 * Creates a parameter handle with a single uniform hop rate. Returns
 * null on invalid input (see [`tasep_last_error`]).
 */
struct TasepParams *tasep_params_new_uniform(size_t n, double alpha, double beta, double hop);

/**
 * Frees a parameter handle. Null is ignored.
 *
 * # Safety
 * `params` must be null or a pointer returned by a `tasep_params_new`
 * function that has not been freed yet.
 */
void tasep_params_free(struct TasepParams *params);

/**
 * Number of sites of a parameter handle; 0 for null.
 *
 * # Safety
 * `params` must be null or a live handle.
 */
size_t tasep_params_n(const struct TasepParams *params);

/**
 * Writes the stationary density of the master equation into `density`
 * (`len` must equal the number of sites).
 *
 * # Safety
 * `params` must be a live handle and `density` must point to `len`
 * writable doubles.
 */
enum TasepStatus tasep_stationary_density(const struct TasepParams *params,
                                          double *density,
                                          size_t len);

/**
 * Solves for the steady state of the selected model (see the module
 * docs for `order`) from the uniform-distribution start and writes its
 * density into `density`. A non-positive `tol` selects the default
 * residual tolerance. `residual_norm` and `interior_margin` receive
 * solver diagnostics when non-null.
 *
 * # Safety
 * `params` must be a live handle, `density` must point to `len`
 * writable doubles, and `residual_norm`/`interior_margin` must each be
 * null or point to a writable double.
 */
enum TasepStatus tasep_steady_density(const struct TasepParams *params,
                                      size_t order,
                                      double tol,
                                      double *density,
                                      size_t len,
                                      double *residual_norm,
                                      double *interior_margin);

/**
 * Integrates the selected model (see the module docs for `order`) from
 * the uniform-distribution start to time `t_final` and writes the
 * density of the final state into `density`.
 *
 * # Safety
 * `params` must be a live handle and `density` must point to `len`
 * writable doubles.
 */
enum TasepStatus tasep_evolve_density(const struct TasepParams *params,
                                      size_t order,
                                      double t_final,
                                      double *density,
                                      size_t len);

/**
 * Runs the Gillespie simulator with `samples` replicas and writes the
 * per-site density estimates and their standard errors. `stderr_out`
 * may be null when the standard errors are not needed.
 *
 * # Safety
 * `params` must be a live handle, `density` must point to `len`
 * writable doubles, and `stderr_out` must be null or point to `len`
 * writable doubles.
 */
enum TasepStatus tasep_ssa_density(const struct TasepParams *params,
                                   size_t samples,
                                   double t_burn,
                                   double t_measure,
                                   uint64_t seed,
                                   double *density,
                                   double *stderr_out,
                                   size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TASEP_H */
