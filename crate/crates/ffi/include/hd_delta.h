#ifndef HD_DELTA_H
#define HD_DELTA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call.
 */
typedef enum HdStatus {
  HD_STATUS_OK = 0,
  HD_STATUS_NULL_POINTER = 1,
  HD_STATUS_DIMENSION = 2,
  HD_STATUS_INVALID_ARGUMENT = 3,
  HD_STATUS_DEGENERATE = 4,
  HD_STATUS_RANK = 5,
  HD_STATUS_DOMAIN = 6,
  HD_STATUS_HYPOTHESIS = 7,
  HD_STATUS_PARSE = 8,
  HD_STATUS_IO = 9,
  /**
   * A Rust panic was caught at the boundary.
   */
  HD_STATUS_PANIC = 10,
} HdStatus;

/**
 * Vector norm `q` and its compatible matrix norm.
 */
typedef enum HdNorm {
  HD_NORM_L1 = 1,
  HD_NORM_L2 = 2,
  HD_NORM_L_INF = 3,
} HdNorm;

/**
 * Opaque dataset handle.
 */
typedef struct HdDataset HdDataset;

/**
 * Summary of a fitted coefficient vector; β̂ itself goes to a separate buffer.
 */
typedef struct HdFitInfo {
  double lambda;
  double sigma2_hat;
  size_t support_size;
  size_t iterations;
  bool converged;
} HdFitInfo;

typedef struct HdBoundReport {
  double fd_norm;
  double est_err;
  double actual;
  double linear_term;
  double remainder;
  double bound;
  bool holds;
} HdBoundReport;

typedef struct HdSimResult {
  double mean_ratio;
  double ratio_min;
  double ratio_max;
  double mean_selected_c;
  size_t used_reps;
  size_t excluded_reps;
  size_t ratio_violations;
} HdSimResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next `hd_*` call on the same thread.
 */
const char *hd_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *hd_version(void);

/**
 * Copies `x` (`n × p`, row-major) and `y` (`n`) into a new dataset.
 *
 * # Safety
 * `x` and `y` must point to `n * p` and `n` doubles; `out` must be writable.
 */
enum HdStatus hd_dataset_new(const double *x,
                             const double *y,
                             size_t n,
                             size_t p,
                             struct HdDataset **out);

/**
 * Releases a dataset; null is ignored.
 *
 * # Safety
 * `ds` must come from [`hd_dataset_new`] and not be used afterwards.
 */
void hd_dataset_free(struct HdDataset *ds);

/**
 * # Safety
 * `ds` must be a live handle.
 */
size_t hd_dataset_n(const struct HdDataset *ds);

/**
 * # Safety
 * `ds` must be a live handle.
 */
size_t hd_dataset_p(const struct HdDataset *ds);

/**
 * Lasso by coordinate descent. `weights` may be null (unit penalties).
 *
 * # Safety
 * `weights` (if non-null) and `beta_out` must hold `p` doubles; `info` may be null.
 */
enum HdStatus hd_lasso(const struct HdDataset *ds,
                       double lambda,
                       const double *weights,
                       double *beta_out,
                       struct HdFitInfo *info);

/**
 * Two-stage conservative lasso with the same `lambda` in both stages.
 *
 * # Safety
 * `beta_out` must hold `p` doubles; `info` may be null.
 */
enum HdStatus hd_conservative_lasso(const struct HdDataset *ds,
                                    double lambda,
                                    double *beta_out,
                                    struct HdFitInfo *info);

/**
 * Debiased conservative lasso with a nodewise precision matrix using
 * `node_lambda` for every column.
 *
 * # Safety
 * `beta_out` must hold `p` doubles; `info` may be null.
 */
enum HdStatus hd_dcl(const struct HdDataset *ds,
                     double lambda,
                     double node_lambda,
                     double *beta_out,
                     struct HdFitInfo *info);

/**
 * Information-criterion choice over `λ = c·√(log p/n)`. Null `coefs` uses
 * the default 13-point grid.
 *
 * # Safety
 * `coefs` (if non-null) must hold `ncoefs` doubles; `beta_out` must hold
 * `p` doubles; `info` may be null.
 */
enum HdStatus hd_select_lambda_ic(const struct HdDataset *ds,
                                  const double *coefs,
                                  size_t ncoefs,
                                  double *beta_out,
                                  struct HdFitInfo *info);

/**
 * Bound chain for `f(β) = Dβ` with `D` `m × p` row-major.
 *
 * # Safety
 * `d` must hold `m * p` doubles, `beta_hat`/`beta0` `p` each; `out` writable.
 */
enum HdStatus hd_pathwise_check_linear(const double *d,
                                       size_t m,
                                       size_t p,
                                       const double *beta_hat,
                                       const double *beta0,
                                       enum HdNorm norm,
                                       struct HdBoundReport *out);

/**
 * Bound chain for `f(β) = β'Σβ` with symmetric `Σ` `p × p`.
 *
 * # Safety
 * `sigma` must hold `p * p` doubles, `beta_hat`/`beta0` `p` each; `out` writable.
 */
enum HdStatus hd_pathwise_check_quadratic(const double *sigma,
                                          size_t p,
                                          const double *beta_hat,
                                          const double *beta0,
                                          enum HdNorm norm,
                                          struct HdBoundReport *out);

/**
 * GMV weights `Θ1/(1'Θ1)` for a `p × p` precision matrix.
 *
 * # Safety
 * `theta` must hold `p * p` doubles and `w_out` `p`.
 */
enum HdStatus hd_gmv_weights(const double *theta, size_t p, double *w_out);

/**
 * Both portfolio variance-error bounds for estimated weights `w_hat`
 * against `w` under covariance `sigma`. Either output may be null.
 *
 * # Safety
 * `w_hat`/`w` must hold `p` doubles and `sigma` `p * p`.
 */
enum HdStatus hd_portfolio_bounds(const double *w_hat,
                                  const double *w,
                                  const double *sigma,
                                  size_t p,
                                  struct HdBoundReport *theorem_out,
                                  struct HdBoundReport *direct_out);

/**
 * One Monte Carlo cell with the default λ grid and printed ratio scale.
 * `threads == 0` uses the global pool.
 *
 * # Safety
 * `out` must be writable.
 */
enum HdStatus hd_simulate_cell(size_t n,
                               size_t p,
                               size_t s0,
                               size_t reps,
                               uint64_t seed,
                               size_t threads,
                               struct HdSimResult *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HD_DELTA_H */
