#ifndef DDSC_H
#define DDSC_H

/* Generated by cbindgen from crates/ffi. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum DdscStatus {
  DDSC_STATUS_OK = 0,
  DDSC_STATUS_NULL_POINTER = 1,
  DDSC_STATUS_INVALID_ARGUMENT = 2,
  DDSC_STATUS_DIMENSION = 3,
  DDSC_STATUS_UNSTABLE = 4,
  DDSC_STATUS_SOLVER = 5,
  DDSC_STATUS_IO = 6,
  DDSC_STATUS_PARSE = 7,
  DDSC_STATUS_PANIC = 8,
} DdscStatus;

typedef enum DdscNorm {
  DDSC_NORM_H2 = 0,
  DDSC_NORM_HINF = 1,
} DdscNorm;

typedef enum DdscStructure {
  DDSC_STRUCTURE_UNSTRUCTURED = 0,
  /**
   * Pattern-constrained gain by iterative linearization.
   */
  DDSC_STRUCTURE_STRUCTURED = 1,
  /**
   * Diagonal-`P` convex restriction on the pattern.
   */
  DDSC_STRUCTURE_PDIAG_BASELINE = 2,
} DdscStructure;

typedef enum DdscMultipliers {
  DDSC_MULTIPLIERS_PER_SAMPLE = 0,
  DDSC_MULTIPLIERS_SHARED = 1,
} DdscMultipliers;

/**
 * Opaque synthesis result handle.
 */
typedef struct DdscResult DdscResult;

/**
 * Opaque plant handle.
 */
typedef struct DdscSystem DdscSystem;

/**
 * Opaque trajectory handle.
 */
typedef struct DdscTrajectory DdscTrajectory;

/**
 * Interior-point tolerances.
 */
typedef struct DdscSettings {
  double tol_feas;
  double tol_gap;
  double strict_margin;
  size_t max_ipm_iters;
} DdscSettings;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ddsc_version(void);

/**
 * Message for the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *ddsc_last_error_message(void);

/**
 * Default tolerances.
 */
struct DdscSettings ddsc_settings_default(void);

/**
 * Builtin plant by name (`h2-example`, `hinf-example`).
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a writable pointer.
 */
enum DdscStatus ddsc_system_builtin(const char *name, struct DdscSystem **out);

/**
 * Plant from row-major matrices `A (nx×nx)`, `B (nx×nu)`, `C (ny×nx)`,
 * `D (ny×nu)`, `G (nx×nd)`, `H (ny×nd)`.
 *
 * # Safety
 * Each matrix pointer must reference the stated number of doubles and `out`
 * must be writable.
 */
enum DdscStatus ddsc_system_new(size_t nx,
                                size_t nu,
                                size_t ny,
                                size_t nd,
                                const double *a,
                                const double *b,
                                const double *c,
                                const double *d,
                                const double *g,
                                const double *h,
                                struct DdscSystem **out);

/**
 * Plant from a JSON file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` a writable pointer.
 */
enum DdscStatus ddsc_system_load(const char *path, struct DdscSystem **out);

/**
 * Writes `nx, nu, ny, nd`; any out-pointer may be NULL.
 *
 * # Safety
 * `sys` must be a live handle; non-NULL out-pointers must be writable.
 */
enum DdscStatus ddsc_system_dims(const struct DdscSystem *sys,
                                 size_t *nx,
                                 size_t *nu,
                                 size_t *ny,
                                 size_t *nd);

/**
 * # Safety
 * `sys` must be NULL or a handle not yet freed.
 */
void ddsc_system_free(struct DdscSystem *sys);

/**
 * Simulates `t` noisy steps with noise norm at most `eps`, zero initial state
 * and unit Gaussian inputs.
 *
 * # Safety
 * `sys` must be a live handle and `out` writable.
 */
enum DdscStatus ddsc_trajectory_simulate(const struct DdscSystem *sys,
                                         size_t t,
                                         double eps,
                                         uint64_t seed,
                                         struct DdscTrajectory **out);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable.
 */
enum DdscStatus ddsc_trajectory_load(const char *path, struct DdscTrajectory **out);

/**
 * # Safety
 * `traj` must be a live handle and `path` a NUL-terminated string.
 */
enum DdscStatus ddsc_trajectory_save(const struct DdscTrajectory *traj, const char *path);

/**
 * Number of transitions `T`, or 0 for NULL.
 *
 * # Safety
 * `traj` must be NULL or a live handle.
 */
size_t ddsc_trajectory_len(const struct DdscTrajectory *traj);

/**
 * # Safety
 * `traj` must be NULL or a handle not yet freed.
 */
void ddsc_trajectory_free(struct DdscTrajectory *traj);

/**
 * Synthesizes a gain. With `traj` NULL the problem is model-based; otherwise
 * only `C, D, G, H` of `sys` are used. `pattern` (e.g. `"110;011"`) is
 * required unless `structure` is unstructured. `settings` may be NULL for
 * defaults. A solve that ends without an optimal status still returns
 * `DDSC_STATUS_OK` with a result whose status is not optimal.
 *
 * # Safety
 * Handles must be live, strings NUL-terminated and `out` writable.
 */
enum DdscStatus ddsc_synthesize(const struct DdscSystem *sys,
                                const struct DdscTrajectory *traj,
                                enum DdscNorm norm,
                                enum DdscStructure structure,
                                const char *pattern,
                                enum DdscMultipliers multipliers,
                                const struct DdscSettings *settings,
                                struct DdscResult **out);

/**
 * Performance bound, `+inf` when the solve was not optimal, NaN for NULL.
 *
 * # Safety
 * `res` must be NULL or a live handle.
 */
double ddsc_result_gamma(const struct DdscResult *res);

/**
 * # Safety
 * `res` must be NULL or a live handle.
 */
bool ddsc_result_is_optimal(const struct DdscResult *res);

/**
 * Solver iterations for single solves, linearized solves for the iterative method.
 *
 * # Safety
 * `res` must be NULL or a live handle.
 */
size_t ddsc_result_iterations(const struct DdscResult *res);

/**
 * Copies the gain `K (nu×nx)` row-major into `buf`, which holds `len` doubles.
 *
 * # Safety
 * `res` must be a live handle and `buf` writable for `len` doubles.
 */
enum DdscStatus ddsc_result_gain(const struct DdscResult *res, double *buf, size_t len);

/**
 * Result serialized as JSON; release with [`ddsc_string_free`].
 *
 * # Safety
 * `res` must be a live handle and `out` writable.
 */
enum DdscStatus ddsc_result_to_json(const struct DdscResult *res, char **out);

/**
 * # Safety
 * `res` must be NULL or a handle not yet freed.
 */
void ddsc_result_free(struct DdscResult *res);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library and not yet freed.
 */
void ddsc_string_free(char *s);

/**
 * Closed-loop norm of `u = Kx` with `k` row-major `nu×nx`; H∞ by frequency sweep.
 *
 * # Safety
 * `sys` must be a live handle, `k` must hold `nu·nx` doubles and `out` be writable.
 */
enum DdscStatus ddsc_closed_loop_norm(const struct DdscSystem *sys,
                                      const double *k,
                                      enum DdscNorm norm,
                                      double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDSC_H */
