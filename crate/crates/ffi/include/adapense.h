#ifndef ADAPENSE_H
#define ADAPENSE_H

#include <stddef.h>
#include <stdint.h>

// Status codes; non-zero values mirror the command-line exit codes where
// they overlap.
typedef enum ApStatus {
  AP_STATUS_OK = 0,
  // Null pointer or buffer too small.
  AP_STATUS_INVALID_ARGUMENT = 1,
  // Invalid configuration value.
  AP_STATUS_CONFIG_ERROR = 2,
  // Invalid or degenerate data.
  AP_STATUS_DATA_ERROR = 3,
  AP_STATUS_CONVERGENCE_ERROR = 4,
  // A Rust panic was caught at the boundary.
  AP_STATUS_INTERNAL_ERROR = 5,
} ApStatus;

// Opaque dataset handle.
typedef struct ApDataset ApDataset;

// Opaque fit handle.
typedef struct ApFit ApFit;

// Fitting options. Obtain defaults from [`ap_fit_config_default`].
//
// `alphas`/`zetas` may be null, in which case the defaults
// {0.5, 0.75, 1} and {1, 2} are used. `threads = 0` uses all cores.
typedef struct ApFitConfig {
  double delta;
  double c_tau;
  size_t folds;
  size_t replications;
  uint64_t seed;
  size_t n_lambda;
  double lambda_ratio;
  const double *alphas;
  size_t n_alphas;
  const double *zetas;
  size_t n_zetas;
  // Non-zero for the two-stage adaptive estimator.
  int32_t adaptive;
  size_t threads;
} ApFitConfig;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last error raised on this thread, or null. The pointer
// stays valid until the next failing call on the same thread.
const char *ap_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *ap_version(void);

struct ApFitConfig ap_fit_config_default(void);

// Copies `n` observations of `p` predictors (`x` row-major, length `n * p`)
// and the response `y` into a new dataset.
//
// # Safety
// `x` must point to `n * p` doubles, `y` to `n` doubles and `out` to a
// writable handle slot.
enum ApStatus ap_dataset_new(const double *x,
                             const double *y,
                             size_t n,
                             size_t p,
                             struct ApDataset **out_handle);

// # Safety
// `data` must be null or a handle from [`ap_dataset_new`] not yet freed.
void ap_dataset_free(struct ApDataset *data);

// Fits the estimator with cross-validated hyper-parameters.
//
// # Safety
// `data` must be a live dataset handle, `config` null (defaults) or a valid
// configuration, and `out_fit` a writable handle slot.
enum ApStatus ap_fit(const struct ApDataset *data,
                     const struct ApFitConfig *config,
                     struct ApFit **out_fit);

// # Safety
// `fit` must be null or a handle from [`ap_fit`] not yet freed.
void ap_fit_free(struct ApFit *fit);

// Number of slope coefficients, or 0 for a null handle.
//
// # Safety
// `fit` must be null or a live fit handle.
size_t ap_fit_num_coefficients(const struct ApFit *fit);

// Writes the intercept and the `len` slope coefficients (original scale).
//
// # Safety
// `intercept` must be writable and `beta` must hold `len` doubles.
enum ApStatus ap_fit_coefficients(const struct ApFit *fit,
                                  double *intercept,
                                  double *beta,
                                  size_t len);

// Residual M-scale of the fit, consistent under Normal errors.
//
// # Safety
// `fit` must be a live fit handle and `scale` writable.
enum ApStatus ap_fit_scale(const struct ApFit *fit, double *scale);

// Selected penalty level, mixing parameter and exponent (NaN for the
// non-adaptive estimator).
//
// # Safety
// `fit` must be a live fit handle; the outputs must be writable.
enum ApStatus ap_fit_selected(const struct ApFit *fit, double *lambda, double *alpha, double *zeta);

// Predictions `intercept + x beta` for `n` rows of row-major `x`.
//
// # Safety
// `x` must hold `n * p` doubles (p = number of coefficients) and
// `predictions` `n` doubles.
enum ApStatus ap_fit_predict(const struct ApFit *fit,
                             const double *x,
                             size_t n,
                             double *predictions);

// M-scale of `values` with the bisquare function, consistent for the
// standard deviation under the Normal model, at breakdown point `delta`.
//
// # Safety
// `values` must hold `n` doubles and `out_scale` be writable.
enum ApStatus ap_m_scale(const double *values, size_t n, double delta, double *out_scale);

// Tau-scale of `values` (uncentered) with tuning constant `c_tau`.
//
// # Safety
// `values` must hold `n` doubles and `out_scale` be writable.
enum ApStatus ap_tau_scale(const double *values, size_t n, double c_tau, double *out_scale);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADAPENSE_H */
