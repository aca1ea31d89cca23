/* C interface for the ckm duration estimators. */

#ifndef CKM_H
#define CKM_H

/* Generated by cbindgen from the ckm-ffi crate; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

// Result of every fallible call.
typedef enum CkmStatus {
  // The call succeeded.
  CKM_STATUS_OK = 0,
  // A required pointer was null.
  CKM_STATUS_NULL_POINTER = 1,
  // A scalar argument was out of range or an enum value unknown.
  CKM_STATUS_INVALID_ARGUMENT = 2,
  // The input data failed validation.
  CKM_STATUS_INVALID_DATA = 3,
  // Kernel weights vanished near an evaluation point.
  CKM_STATUS_EMPTY_NEIGHBORHOOD = 4,
  // A cumulative hazard reached infinity on the requested grid.
  CKM_STATUS_HAZARD_DIVERGENCE = 5,
  // Evaluation was refused beyond the inference guard.
  CKM_STATUS_GUARD_VIOLATION = 6,
  // A numeric construction failed.
  CKM_STATUS_NUMERIC = 7,
  // An internal invariant failed; report this.
  CKM_STATUS_INTERNAL = 8,
} CkmStatus;

// Kernel profile selector for `kernel` arguments.
typedef enum CkmKernel {
  // Fourth-order polynomial profile, the default.
  CKM_KERNEL_QUARTIC4 = 0,
  // Second-order Epanechnikov profile.
  CKM_KERNEL_EPANECHNIKOV = 1,
} CkmKernel;

// Conditional estimator form selector for `variant` arguments.
typedef enum CkmVariant {
  // Exponential of the negative cumulative hazard.
  CKM_VARIANT_EXPONENTIAL = 0,
  // Product-limit form.
  CKM_VARIANT_PRODUCT_LIMIT = 1,
} CkmVariant;

// Hazard transform selector for `hazard` arguments.
typedef enum CkmHazard {
  // Negative logarithm of survival.
  CKM_HAZARD_NEG_LOG = 0,
  // Jump-sum integral over the estimate's own steps.
  CKM_HAZARD_NA_INTEGRAL = 1,
} CkmHazard;

// Owned sample handle; free with [`ckm_sample_free`].
typedef struct CkmSample CkmSample;

// Owned scenario covariate handle; free with [`ckm_scenario_free`].
typedef struct CkmScenario CkmScenario;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on the calling thread.
//
// The pointer stays valid until the next `ckm_` call on the same thread.
// Never null; the string is empty when no failure has occurred yet.
//
// # Safety
//
// The returned pointer must not be freed or written through, and must not
// be read after a later `ckm_` call on this thread.
const char *ckm_last_error_message(void);

// Static description of a status code; never null.
//
// # Safety
//
// The returned pointer references a static string and must not be freed.
const char *ckm_status_message(uint32_t status);

// Plug-in bandwidth `3 n^(-1/7)`; NaN when `n` is zero.
//
// # Safety
//
// Always safe; marked unsafe only for signature uniformity of the binding.
double ckm_default_bandwidth(uintptr_t n);

// Builds a sample from parallel arrays.
//
// `y` holds durations, `status` holds censoring indicators (0 censored,
// 1 uncensored), and `x` holds covariates row-major with `dim` entries per
// observation. On success writes a handle to `out` and returns
// `CKM_STATUS_OK`.
//
// # Safety
//
// `y` and `status` must point to `n` readable elements, `x` to `n * dim`
// readable elements, and `out` to a writable handle slot. The handle must
// be released with [`ckm_sample_free`].
enum CkmStatus ckm_sample_new(const double *y,
                              const uint8_t *status,
                              const double *x,
                              uintptr_t n,
                              uintptr_t dim,
                              struct CkmSample **out);

// Releases a sample handle; null is ignored.
//
// # Safety
//
// `sample` must be null or a handle from [`ckm_sample_new`] not yet freed.
void ckm_sample_free(struct CkmSample *sample);

// Builds a scenario covariate set from a row-major array of `n` rows with
// `dim` entries each.
//
// # Safety
//
// `x` must point to `n * dim` readable elements and `out` to a writable
// handle slot. The handle must be released with [`ckm_scenario_free`].
enum CkmStatus ckm_scenario_new(const double *x,
                                uintptr_t n,
                                uintptr_t dim,
                                struct CkmScenario **out);

// Releases a scenario handle; null is ignored.
//
// # Safety
//
// `scenario` must be null or a handle from [`ckm_scenario_new`] not yet
// freed.
void ckm_scenario_free(struct CkmScenario *scenario);

// Product-limit distribution estimate evaluated at `len` times.
//
// # Safety
//
// `sample` must be a live handle, `ts` must point to `len` readable
// elements, and `out_f` to `len` writable elements.
enum CkmStatus ckm_kaplan_meier(const struct CkmSample *sample,
                                const double *ts,
                                uintptr_t len,
                                double *out_f);

// Scenario-averaged conditional distribution estimate at `len` times.
//
// `kernel` and `variant` take `CkmKernel` and `CkmVariant` values. Rows
// whose kernel neighborhood is empty fail the call.
//
// # Safety
//
// `sample` and `scenario` must be live handles, `ts` must point to `len`
// readable elements, and `out_f` to `len` writable elements.
enum CkmStatus ckm_counterfactual_cdf(const struct CkmSample *sample,
                                      const struct CkmScenario *scenario,
                                      const double *ts,
                                      uintptr_t len,
                                      double h,
                                      uint32_t kernel,
                                      uint32_t variant,
                                      double *out_f);

// Distribution and cumulative-hazard policy effects at `len` times.
//
// `ts` must be finite, nonnegative and strictly increasing. `hazard` takes
// `CkmHazard` values and `isotonize` is a boolean flag. Divergent hazards
// fail the call; there is no truncating mode here because the output
// buffers have a fixed length.
//
// # Safety
//
// `sample` and `scenario` must be live handles, `ts` must point to `len`
// readable elements, and `out_delta_f` and `out_delta_lambda` to `len`
// writable elements each.
enum CkmStatus ckm_policy_effect(const struct CkmSample *sample,
                                 const struct CkmScenario *scenario,
                                 const double *ts,
                                 uintptr_t len,
                                 double h,
                                 uint32_t kernel,
                                 uint32_t variant,
                                 uint32_t hazard,
                                 uint8_t isotonize,
                                 double *out_delta_f,
                                 double *out_delta_lambda);

// Pointwise variance of the product-limit estimate at `len` times.
//
// Uses the influence-function plug-in with evaluation guarded at the
// `guard_prob` quantile of the uncensored durations; times beyond the guard
// fail the call.
//
// # Safety
//
// `sample` must be a live handle, `ts` must point to `len` readable
// elements, and `out_var` to `len` writable elements.
enum CkmStatus ckm_km_variance(const struct CkmSample *sample,
                               const double *ts,
                               uintptr_t len,
                               double guard_prob,
                               double *out_var);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CKM_H */
