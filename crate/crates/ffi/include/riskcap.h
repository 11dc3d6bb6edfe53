#ifndef RISKCAP_H
#define RISKCAP_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define RISKCAP_WARN_INFINITE_MEAN 1

#define RISKCAP_WARN_UNRELIABLE_CI 2

#define RISKCAP_WARN_UNCONVERGED 4

typedef enum RiskcapStatus {
  RISKCAP_STATUS_OK = 0,
  /**
   * Bad arguments or data.
   */
  RISKCAP_STATUS_VALIDATION = 1,
  /**
   * Numerical failure (zero-mass truncation, sample cap, ...).
   */
  RISKCAP_STATUS_COMPUTATION = 2,
  RISKCAP_STATUS_IO = 3,
  RISKCAP_STATUS_NULL_POINTER = 4,
  /**
   * A Rust panic was caught at the boundary.
   */
  RISKCAP_STATUS_PANIC = 5,
} RiskcapStatus;

typedef enum RiskcapSeverity {
  RISKCAP_SEVERITY_LOGNORMAL = 0,
  RISKCAP_SEVERITY_PARETO = 1,
} RiskcapSeverity;

typedef enum RiskcapMode {
  RISKCAP_MODE_CONDITIONAL = 0,
  RISKCAP_MODE_PREDICTIVE = 1,
} RiskcapMode;

/**
 * One risk cell with a non-informative prior.
 */
typedef struct RiskcapCellModel RiskcapCellModel;

/**
 * Annual counts plus the severities of all events.
 */
typedef struct RiskcapLossData RiskcapLossData;

/**
 * Quantile estimate with its order-statistic confidence interval.
 */
typedef struct RiskcapQuantile {
  double q;
  double value;
  double ci_lower;
  double ci_upper;
  double ci_level;
  uint64_t k;
  bool reliable_ci;
  bool converged;
  /**
   * Bitwise OR of `RISKCAP_WARN_*`.
   */
  uint32_t warnings;
} RiskcapQuantile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *riskcap_version(void);

/**
 * Message of the last failed call on this thread, or NULL after a success.
 * The pointer stays valid until the next riskcap call on this thread.
 */
const char *riskcap_last_error(void);

/**
 * Builds loss data from `n_years` annual counts and `n_events` severities,
 * where `n_events` must equal the sum of the counts.
 *
 * # Safety
 * `counts` and `severities` must point to at least `n_years` and `n_events`
 * readable values (they may be NULL when the length is 0); `out` must be a
 * valid pointer.
 */
enum RiskcapStatus riskcap_loss_data_new(const uint64_t *counts,
                                         size_t n_years,
                                         const double *severities,
                                         size_t n_events,
                                         struct RiskcapLossData **out);

/**
 * # Safety
 * `data` must be NULL or a handle from [`riskcap_loss_data_new`] that has not
 * been freed.
 */
void riskcap_loss_data_free(struct RiskcapLossData *data);

/**
 * Creates a cell with non-informative priors. `threshold` is used for Pareto
 * severities only; `finite_mean` restricts the Pareto tail index to `ξ > 1`.
 *
 * # Safety
 * `cell_id` must be a NUL-terminated UTF-8 string and `out` a valid pointer.
 */
enum RiskcapStatus riskcap_cell_model_new(const char *cell_id,
                                          enum RiskcapSeverity severity,
                                          double threshold,
                                          bool finite_mean,
                                          struct RiskcapCellModel **out);

/**
 * # Safety
 * `model` must be NULL or a handle from [`riskcap_cell_model_new`] that has
 * not been freed.
 */
void riskcap_cell_model_free(struct RiskcapCellModel *model);

/**
 * Capital of one cell: the `q` quantile of `k` simulated annual losses, with a
 * `gamma` confidence interval. `workers = 0` uses all available cores; the
 * result does not depend on it.
 *
 * # Safety
 * `model` and `data` must be live handles and `out` a valid pointer.
 */
enum RiskcapStatus riskcap_capital(const struct RiskcapCellModel *model,
                                   const struct RiskcapLossData *data,
                                   enum RiskcapMode mode,
                                   double q,
                                   uint64_t k,
                                   double gamma,
                                   uint64_t seed,
                                   size_t workers,
                                   struct RiskcapQuantile *out);

/**
 * Conjugate update of a `Gamma(shape, scale)` prior on a Poisson rate.
 *
 * # Safety
 * `counts` must point to `n` readable values (NULL allowed when `n` is 0);
 * the output pointers must be valid.
 */
enum RiskcapStatus riskcap_poisson_gamma_update(double prior_shape,
                                                double prior_scale,
                                                const uint64_t *counts,
                                                size_t n,
                                                double *out_shape,
                                                double *out_scale);

/**
 * Equal-tailed credible interval of a `Gamma(shape, scale)` distribution.
 *
 * # Safety
 * The output pointers must be valid.
 */
enum RiskcapStatus riskcap_gamma_interval(double shape,
                                          double scale,
                                          double level,
                                          double *out_lower,
                                          double *out_upper);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* RISKCAP_H */
