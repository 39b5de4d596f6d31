/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef LDP_ERM_H
#define LDP_ERM_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every call.
 */
typedef enum {
  LDP_STATUS_OK = 0,
  LDP_STATUS_NULL_POINTER = 1,
  LDP_STATUS_INVALID_UTF8 = 2,
  LDP_STATUS_PARAMETER = 3,
  LDP_STATUS_ESTIMATION = 4,
  LDP_STATUS_CONFIG = 5,
  LDP_STATUS_PROTOCOL = 6,
  LDP_STATUS_QUERY_CLASS = 7,
  LDP_STATUS_DEGENERATE = 8,
  LDP_STATUS_IO = 9,
  LDP_STATUS_PANIC = 10,
} LdpStatus;

/**
 * Opaque marginal release.
 */
typedef struct LdpMarginals LdpMarginals;

/**
 * Opaque smooth-query release.
 */
typedef struct LdpSmooth LdpSmooth;

/**
 * Privacy setting. With `disabled` set the exact non-private value is
 * computed and the other fields are ignored.
 */
typedef struct {
  double epsilon;
  double delta;
  bool disabled;
} LdpPrivacy;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next call on the same thread.
 */
const char *ldp_last_error_message(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *ldp_version(void);

/**
 * Scalar Laplace average of `n` values in `[0, bound]`.
 *
 * # Safety
 * `values` must point to `n` readable doubles and `out_mean` to a writable double.
 */
LdpStatus ldp_avg_1d(const double *values,
                     size_t n,
                     double bound,
                     double epsilon,
                     uint64_t seed,
                     double *out_mean);

/**
 * Private grid mechanism on `[0,1]^p` with the loss `|w - x|^2 / p`
 * (`loss = 0`) or `|w - x|_1 / p` (`loss = 1`). `one_bit` selects the
 * one-bit protocol, which needs `epsilon <= ln 2`. Writes the `p` coordinates
 * of the private minimizer to `w_out`.
 *
 * # Safety
 * `records` must point to `n * p` doubles in row-major order and `w_out` to
 * `p` writable doubles.
 */
LdpStatus ldp_grid_erm(const double *records,
                       size_t n,
                       size_t p,
                       uint32_t loss,
                       size_t k,
                       size_t h,
                       LdpPrivacy privacy,
                       bool one_bit,
                       uint64_t seed,
                       double *w_out);

/**
 * Private linear-model ERM over the ball of `radius`. `loss` is 0 for the
 * dedicated hinge path, or 1 (hinge), 2 (absolute), 3 (logistic),
 * 4 (half square) through the general path. Labels must be `+1` or `-1`.
 *
 * # Safety
 * `features` must point to `n * p` doubles, `labels` to `n` doubles and
 * `w_out` to `p` writable doubles.
 */
LdpStatus ldp_glm_erm(const double *features,
                      const double *labels,
                      size_t n,
                      size_t p,
                      uint32_t loss,
                      double beta_smoothing,
                      size_t d,
                      double radius,
                      LdpPrivacy privacy,
                      uint64_t seed,
                      double *w_out);

/**
 * Releases the table for all disjunctions of at most `k` of the `p`
 * attributes. `bits` holds `n * p` bytes, each 0 or 1.
 *
 * # Safety
 * `bits` must point to `n * p` readable bytes and `out_handle` to a
 * writable handle slot. Free the handle with [`ldp_marginals_free`].
 */
LdpStatus ldp_marginals_release(const uint8_t *bits,
                                size_t n,
                                size_t p,
                                size_t k,
                                double gamma,
                                LdpPrivacy privacy,
                                uint64_t seed,
                                LdpMarginals **out_handle);

/**
 * Answers the disjunction query `y` (`p` bytes, each 0 or 1, at most `k`
 * ones). The answer is clamped to `[0, 1]`.
 *
 * # Safety
 * `handle` must come from [`ldp_marginals_release`], `query` must point to
 * `p` bytes and `out_answer` to a writable double.
 */
LdpStatus ldp_marginals_answer(const LdpMarginals *handle,
                               const uint8_t *query,
                               size_t p,
                               double *out_answer);

/**
 * # Safety
 * `handle` must come from [`ldp_marginals_release`] and not be used again.
 * NULL is accepted.
 */
void ldp_marginals_free(LdpMarginals *handle);

/**
 * Releases the degree-`t` tensor Chebyshev table of `n` points in
 * `[-1, 1]^p`.
 *
 * # Safety
 * `points` must point to `n * p` doubles and `out_handle` to a writable
 * handle slot. Free the handle with [`ldp_smooth_free`].
 */
LdpStatus ldp_smooth_release(const double *points,
                             size_t n,
                             size_t p,
                             size_t t,
                             LdpPrivacy privacy,
                             uint64_t seed,
                             LdpSmooth **out_handle);

/**
 * Mean of the Gaussian kernel `exp(-|x - center|^2 / (2 h^2))` over the
 * released data.
 *
 * # Safety
 * `handle` must come from [`ldp_smooth_release`], `center` must point to `p`
 * doubles and `out_answer` to a writable double.
 */
LdpStatus ldp_smooth_answer_gaussian(const LdpSmooth *handle,
                                     const double *center,
                                     size_t p,
                                     double bandwidth,
                                     double *out_answer);

/**
 * # Safety
 * `handle` must come from [`ldp_smooth_release`] and not be used again.
 * NULL is accepted.
 */
void ldp_smooth_free(LdpSmooth *handle);

/**
 * Runs the experiment described by a TOML document and writes the report
 * files into `out_dir`. Returns `LDP_STATUS_ESTIMATION` when some trials
 * failed; their rows are still written.
 *
 * # Safety
 * Both arguments must be NUL-terminated UTF-8 strings.
 */
LdpStatus ldp_run_experiment(const char *config_toml, const char *out_dir);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LDP_ERM_H */
