#ifndef HPSG_H
#define HPSG_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum HpsgStatus {
  HPSG_STATUS_OK = 0,
  HPSG_STATUS_NULL_POINTER = 1,
  HPSG_STATUS_INVALID_ARGUMENT = 2,
  HPSG_STATUS_OUT_OF_DOMAIN = 3,
  /**
   * The user callback reported failure or returned a non-finite value.
   */
  HPSG_STATUS_CALLBACK_FAILED = 4,
  HPSG_STATUS_IO = 5,
  HPSG_STATUS_PARSE = 6,
  /**
   * The request is valid but no result exists (e.g. too few samples).
   */
  HPSG_STATUS_NOT_AVAILABLE = 7,
  HPSG_STATUS_INTERNAL = 8,
} HpsgStatus;

/**
 * Degree selection strategies, for [`HpsgBuildOptions::strategy`].
 */
typedef enum HpsgStrategy {
  HPSG_STRATEGY_LINEAR = 0,
  HPSG_STRATEGY_HIGHEST = 1,
  HPSG_STRATEGY_GREEDY = 2,
  HPSG_STRATEGY_KINK = 3,
} HpsgStrategy;

/**
 * Opaque grid handle.
 */
typedef struct HpsgGrid HpsgGrid;

/**
 * Refinement settings. Obtain defaults from [`hpsg_default_options`].
 */
typedef struct HpsgBuildOptions {
  /**
   * One of the `HpsgStrategy` values.
   */
  int32_t strategy;
  double w_max;
  double w_kink;
  uint8_t p_max;
  uint32_t q_min;
  uint32_t q_max;
} HpsgBuildOptions;

/**
 * Target function for [`hpsg_build`]. Writes `f(x)` to `out` and returns 0,
 * or returns non-zero on failure.
 */
typedef int32_t (*HpsgFunction)(const double *x, size_t dim, void *user_data, double *out);

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Default options: greedy strategy, `w_max = 1e-3`, `w_kink = 1`,
 * `p_max = 6`, `q_min = 1`, `q_max = 25`.
 */
struct HpsgBuildOptions hpsg_default_options(void);

/**
 * Builds an interpolant of `f` on the box `[lo, hi]` (arrays of length
 * `dim`). `f` is called from the calling thread only. `options` may be null
 * for defaults.
 */
enum HpsgStatus hpsg_build(size_t dim,
                           const double *lo,
                           const double *hi,
                           const struct HpsgBuildOptions *options,
                           HpsgFunction f,
                           void *user_data,
                           struct HpsgGrid **out);

/**
 * Builds an interpolant of a built-in benchmark function (`curve2d`,
 * `genz-c`, `sobol-g` or `kink1d`) on its native domain.
 */
enum HpsgStatus hpsg_build_benchmark(const char *function,
                                     size_t dim,
                                     const struct HpsgBuildOptions *options,
                                     struct HpsgGrid **out);

/**
 * Evaluates the interpolant at a point of length `dim` in the grid's domain.
 */
enum HpsgStatus hpsg_grid_evaluate(const struct HpsgGrid *grid,
                                   const double *x,
                                   size_t dim,
                                   double *out);

/**
 * Evaluates `n` points stored row by row in `x` (`n * dim` values) and
 * writes `n` values to `out`.
 */
enum HpsgStatus hpsg_grid_evaluate_many(const struct HpsgGrid *grid,
                                        const double *x,
                                        size_t n,
                                        size_t dim,
                                        double *out);

/**
 * Number of basis functions in the grid, 0 for a null handle.
 */
size_t hpsg_grid_num_nodes(const struct HpsgGrid *grid);

/**
 * Dimension of the grid, 0 for a null handle.
 */
size_t hpsg_grid_dim(const struct HpsgGrid *grid);

/**
 * Writes the grid in the text dump format.
 */
enum HpsgStatus hpsg_grid_write_dump(const struct HpsgGrid *grid, const char *path);

/**
 * Loads a grid written by [`hpsg_grid_write_dump`].
 */
enum HpsgStatus hpsg_grid_read_dump(const char *path, struct HpsgGrid **out);

/**
 * Releases a grid. Null is ignored.
 */
void hpsg_grid_free(struct HpsgGrid *grid);

/**
 * Derivative jump estimate at `center` from `n` samples `(x[i], f[i])`,
 * which need not be sorted. Returns `NotAvailable` when no stencil can be
 * formed around `center`.
 */
enum HpsgStatus hpsg_jump_estimate(const double *x,
                                   const double *f,
                                   size_t n,
                                   double center,
                                   double *out);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from this thread.
 */
const char *hpsg_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hpsg_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HPSG_H */
