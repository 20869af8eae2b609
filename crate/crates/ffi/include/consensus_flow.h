#ifndef CONSENSUS_FLOW_H
#define CONSENSUS_FLOW_H

/* Generated with cbindgen:0.29.4 */

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CfStatus {
  CF_STATUS_OK = 0,
  CF_STATUS_NULL_POINTER = 1,
  CF_STATUS_INVALID_ARGUMENT = 2,
  CF_STATUS_INVALID_GRAPH = 3,
  CF_STATUS_REDUCIBLE = 4,
  CF_STATUS_DOMAIN = 5,
  CF_STATUS_NOT_SYMMETRIC = 6,
  CF_STATUS_NUMERICAL = 7,
  CF_STATUS_BUFFER_SIZE = 8,
  CF_STATUS_PANIC = 9,
} CfStatus;

/*
 Values accepted by the `potential` parameters.
 */
typedef enum CfPotential {
  CF_POTENTIAL_QUADRATIC = 0,
  CF_POTENTIAL_ENTROPY = 1,
  CF_POTENTIAL_GIBBS = 2,
} CfPotential;

/*
 Values accepted by the `mode` parameter of [`cf_verify`].
 */
typedef enum CfMode {
  CF_MODE_NORMAL = 0,
  CF_MODE_STRICT = 1,
  CF_MODE_LENIENT = 2,
} CfMode;

/*
 Validated graph Laplacian.
 */
typedef struct CfLaplacian CfLaplacian;

/*
 Sampled solution of a consensus system.
 */
typedef struct CfTrajectory CfTrajectory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failed call on this thread, or NULL. The pointer is
 valid until the next failing call on the same thread.
 */
const char *cf_last_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *cf_version(void);

/*
 Builds the Laplacian of a graph with `m` directed edges `sources[k] ->
 targets[k]` of weight `weights[k]`.

 # Safety
 The three edge arrays must hold `m` elements each; `out` must be a valid
 pointer to writable storage for one handle.
 */
enum CfStatus cf_laplacian_new(size_t n,
                               const size_t *sources,
                               const size_t *targets,
                               const double *weights,
                               size_t m,
                               struct CfLaplacian **out);

/*
 Parses the edge-list text format (`n <count>` header, then `i j w`
 lines) into a Laplacian handle.

 # Safety
 `text` must be a NUL-terminated string; `out` as in [`cf_laplacian_new`].
 */
enum CfStatus cf_laplacian_from_edge_list(const char *text, struct CfLaplacian **out);

/*
 # Safety
 `l` must be NULL or a handle from this library not yet freed.
 */
void cf_laplacian_free(struct CfLaplacian *l);

/*
 Node count, or 0 for NULL.

 # Safety
 `l` must be NULL or a live handle.
 */
size_t cf_laplacian_size(const struct CfLaplacian *l);

/*
 1 if symmetric, 0 otherwise (including NULL).

 # Safety
 `l` must be NULL or a live handle.
 */
int32_t cf_laplacian_is_symmetric(const struct CfLaplacian *l);

/*
 Row-major `n * n` entries of `L`.

 # Safety
 `out` must point to `len` writable doubles.
 */
enum CfStatus cf_laplacian_entries(const struct CfLaplacian *l, double *out, size_t len);

/*
 Perron vector `q` (`q^T L = 0`, `q > 0`, `sum q = 1`).

 # Safety
 `out` must point to `len` writable doubles.
 */
enum CfStatus cf_perron_vector(const struct CfLaplacian *l, double *out, size_t len);

/*
 Row-major `exp(-L t)`.

 # Safety
 `out` must point to `len` writable doubles.
 */
enum CfStatus cf_flow_map(const struct CfLaplacian *l, double t, double *out, size_t len);

/*
 Row-major inverse metric `G^{-1}(x)` for a [`CfPotential`] code;
 `reference` is the quadratic minimizer and ignored otherwise.

 # Safety
 `x` must hold `n` doubles and `out` `len` writable doubles.
 */
enum CfStatus cf_metric_matrix(const struct CfLaplacian *l,
                               uint32_t potential_code,
                               double reference,
                               const double *x,
                               size_t n,
                               double alpha,
                               double *out,
                               size_t len);

/*
 Relative residual of `L x = G^{-1}(x) grad V(x)`.

 # Safety
 `x` must hold `n` doubles; `residual` must be writable.
 */
enum CfStatus cf_gradient_identity_residual(const struct CfLaplacian *l,
                                            uint32_t potential_code,
                                            double reference,
                                            const double *x,
                                            size_t n,
                                            double alpha,
                                            double *residual);

/*
 Logarithmic mean of two positive numbers.

 # Safety
 `out` must be writable.
 */
enum CfStatus cf_log_mean(double a, double b, double *out);

/*
 RK4 solution of `x' = -L x` from `x0` sampled every `dt` up to `t_end`.

 # Safety
 `x0` must hold `n` doubles; `out` must be writable.
 */
enum CfStatus cf_integrate_linear(const struct CfLaplacian *l,
                                  const double *x0,
                                  size_t n,
                                  double t_end,
                                  double dt,
                                  struct CfTrajectory **out);

/*
 Log-Laplacian flow `x' = -L ln(x / alpha)` from a positive `x0`.

 # Safety
 As [`cf_integrate_linear`].
 */
enum CfStatus cf_integrate_log_laplacian(const struct CfLaplacian *l,
                                         const double *x0,
                                         size_t n,
                                         double alpha,
                                         double t_end,
                                         double dt,
                                         struct CfTrajectory **out);

/*
 # Safety
 `t` must be NULL or a live handle.
 */
void cf_trajectory_free(struct CfTrajectory *t);

/*
 Number of samples, or 0 for NULL.

 # Safety
 `t` must be NULL or a live handle.
 */
size_t cf_trajectory_len(const struct CfTrajectory *t);

/*
 State dimension, or 0 for NULL.

 # Safety
 `t` must be NULL or a live handle.
 */
size_t cf_trajectory_dim(const struct CfTrajectory *t);

/*
 Sample times.

 # Safety
 `out` must point to `len` writable doubles.
 */
enum CfStatus cf_trajectory_times(const struct CfTrajectory *t, double *out, size_t len);

/*
 State at sample `k`.

 # Safety
 `out` must point to `len` writable doubles.
 */
enum CfStatus cf_trajectory_state(const struct CfTrajectory *t, size_t k, double *out, size_t len);

/*
 Runs the verification suite over `count` instances of each size and
 reports the number of checks run and failed. A completed run returns
 `CF_STATUS_OK` even when checks fail.

 # Safety
 `sizes` must hold `num_sizes` elements; `total` and `failed` must be
 writable.
 */
enum CfStatus cf_verify(uint64_t seed,
                        size_t count,
                        const size_t *sizes,
                        size_t num_sizes,
                        uint32_t mode,
                        size_t *total,
                        size_t *failed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CONSENSUS_FLOW_H */
