#ifndef PBDW_H
#define PBDW_H

/* Generated by cbindgen; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C API.
 */
typedef enum PbdwStatus {
  PBDW_STATUS_OK = 0,
  PBDW_STATUS_NULL_POINTER = 1,
  PBDW_STATUS_INVALID_ARGUMENT = 2,
  PBDW_STATUS_DIMENSION_MISMATCH = 3,
  PBDW_STATUS_SINGULAR = 4,
  PBDW_STATUS_NOT_CONVERGED = 5,
  PBDW_STATUS_PANIC = 6,
  PBDW_STATUS_OTHER = 7,
} PbdwStatus;

/**
 * Opaque solver handle.
 */
typedef struct PbdwOperator PbdwOperator;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Assembles an operator from `L` (`m × n`), `K` (`m × m`) and `ξ`
 * (`INFINITY` allowed). `lower`/`upper` hold `n` bounds each, or are both
 * null for the linear estimator.
 *
 * # Safety
 * Pointers must reference arrays of the stated sizes; `out` must be writable.
 */
enum PbdwStatus pbdw_operator_new(const double *l,
                                  size_t m,
                                  size_t n,
                                  const double *k,
                                  double xi,
                                  const double *lower,
                                  const double *upper,
                                  struct PbdwOperator **out);

/**
 * Releases an operator; null is ignored.
 *
 * # Safety
 * `op` must come from [`pbdw_operator_new`] and not be used afterwards.
 */
void pbdw_operator_free(struct PbdwOperator *op);

/**
 * Writes the dimensions `m` and `n` of an operator.
 *
 * # Safety
 * `op` must be a live handle; `m` and `n` must be writable.
 */
enum PbdwStatus pbdw_operator_dims(const struct PbdwOperator *op, size_t *m, size_t *n);

/**
 * Solves for `y` (length `m`), writing `ẑ` (`n`), `η̂` (`m`) and, when
 * `objective` is non-null, the objective value.
 *
 * # Safety
 * `y`, `z` and `eta` must reference arrays of the operator's sizes.
 */
enum PbdwStatus pbdw_operator_solve(const struct PbdwOperator *op,
                                    const double *y,
                                    size_t m,
                                    double *z,
                                    double *eta,
                                    double *objective);

/**
 * Inf-sup constant `β_{N,M}` of the operator's `(L, K)`.
 *
 * # Safety
 * `op` must be a live handle; `out` must be writable.
 */
enum PbdwStatus pbdw_inf_sup_beta(const struct PbdwOperator *op, double *out);

/**
 * Nonlinear stability constant `Λ^nl` for the operator's box.
 *
 * # Safety
 * `op` must be a live handle; `out` must be writable.
 */
enum PbdwStatus pbdw_lambda_nl(const struct PbdwOperator *op, double *out);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`). Returns the full message length plus one, or 0 when
 * there is no error.
 *
 * # Safety
 * `buf` must be writable for `len` bytes, or null with `len == 0`.
 */
size_t pbdw_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *pbdw_version(void);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PBDW_H */
