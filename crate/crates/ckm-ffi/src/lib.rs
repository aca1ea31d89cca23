//! C interface over the `ckm` estimators.
//!
//! Handles are opaque and owned by the caller through the matching `_free`
//! function. Estimation functions write into caller-provided buffers and
//! return a [`CkmStatus`]; on any failure the output buffers are untouched
//! and a thread-local message describing the error is available through
//! [`ckm_last_error_message`]. No call unwinds across the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use ckm::counterfactual::{
    counterfactual_cdf, policy_effects, EmptyNeighborhoodPolicy, HazardMethod,
    PolicyEffectOptions,
};
use ckm::data::{CensoredSample, CounterfactualCovariates, Grid, Observation};
use ckm::inference::{km_variance_at, InfluenceContext};
use ckm::kernel::{default_bandwidth, KernelProfile, KernelSpec};
use ckm::survival::{kaplan_meier, BeranVariant};
use ckm::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkmStatus {
    /// The call succeeded.
    Ok = 0,
    /// A required pointer was null.
    NullPointer = 1,
    /// A scalar argument was out of range or an enum value unknown.
    InvalidArgument = 2,
    /// The input data failed validation.
    InvalidData = 3,
    /// Kernel weights vanished near an evaluation point.
    EmptyNeighborhood = 4,
    /// A cumulative hazard reached infinity on the requested grid.
    HazardDivergence = 5,
    /// Evaluation was refused beyond the inference guard.
    GuardViolation = 6,
    /// A numeric construction failed.
    Numeric = 7,
    /// An internal invariant failed; report this.
    Internal = 8,
}

/// Kernel profile selector for `kernel` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkmKernel {
    /// Fourth-order polynomial profile, the default.
    Quartic4 = 0,
    /// Second-order Epanechnikov profile.
    Epanechnikov = 1,
}

/// Conditional estimator form selector for `variant` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkmVariant {
    /// Exponential of the negative cumulative hazard.
    Exponential = 0,
    /// Product-limit form.
    ProductLimit = 1,
}

/// Hazard transform selector for `hazard` arguments.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CkmHazard {
    /// Negative logarithm of survival.
    NegLog = 0,
    /// Jump-sum integral over the estimate's own steps.
    NaIntegral = 1,
}

/// Owned sample handle; free with [`ckm_sample_free`].
pub struct CkmSample(CensoredSample);

/// Owned scenario covariate handle; free with [`ckm_scenario_free`].
pub struct CkmScenario(CounterfactualCovariates);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn remember(message: &str) {
    let owned = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = owned);
}

fn status_of(err: &Error) -> CkmStatus {
    match err {
        Error::EmptySample
        | Error::NegativeDuration { .. }
        | Error::NonBinaryStatus { .. }
        | Error::NonFinite { .. }
        | Error::RaggedCovariates { .. }
        | Error::EmptyCovariates
        | Error::DimensionMismatch { .. }
        | Error::PairedRowsRequired { .. } => CkmStatus::InvalidData,
        Error::EmptyNeighborhood { .. } => CkmStatus::EmptyNeighborhood,
        Error::HazardDivergence { .. } => CkmStatus::HazardDivergence,
        Error::GuardViolation { .. } | Error::BeyondGuard { .. } | Error::NoUncensored => {
            CkmStatus::GuardViolation
        }
        Error::Bandwidth { .. }
        | Error::KernelDimension { .. }
        | Error::InvalidAlpha { .. }
        | Error::EmptyGrid
        | Error::GridPoints { .. }
        | Error::GridRange { .. }
        | Error::GridMismatch { .. }
        | Error::Usage(_) => CkmStatus::InvalidArgument,
        _ => CkmStatus::Numeric,
    }
}

fn fail(err: Error) -> CkmStatus {
    remember(&err.to_string());
    status_of(&err)
}

fn invalid(message: &str) -> CkmStatus {
    remember(message);
    CkmStatus::InvalidArgument
}

fn null_pointer(name: &str) -> CkmStatus {
    remember(&format!("{name} must not be null"));
    CkmStatus::NullPointer
}

fn guarded(body: impl FnOnce() -> CkmStatus) -> CkmStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            remember("internal panic");
            CkmStatus::Internal
        }
    }
}

fn kernel_of(kernel: u32, dim: usize) -> Result<KernelSpec, CkmStatus> {
    let profile = match kernel {
        0 => KernelProfile::Quartic4,
        1 => KernelProfile::Epanechnikov,
        other => return Err(invalid(&format!("unknown kernel selector {other}"))),
    };
    KernelSpec::new(profile, dim).map_err(fail)
}

fn variant_of(variant: u32) -> Result<BeranVariant, CkmStatus> {
    match variant {
        0 => Ok(BeranVariant::Exponential),
        1 => Ok(BeranVariant::ProductLimit),
        other => Err(invalid(&format!("unknown variant selector {other}"))),
    }
}

fn hazard_of(hazard: u32) -> Result<HazardMethod, CkmStatus> {
    match hazard {
        0 => Ok(HazardMethod::NegLog),
        1 => Ok(HazardMethod::NaIntegral),
        other => Err(invalid(&format!("unknown hazard selector {other}"))),
    }
}

/// Message for the most recent failure on the calling thread.
///
/// The pointer stays valid until the next `ckm_` call on the same thread.
/// Never null; the string is empty when no failure has occurred yet.
///
/// # Safety
///
/// The returned pointer must not be freed or written through, and must not
/// be read after a later `ckm_` call on this thread.
#[no_mangle]
pub unsafe extern "C" fn ckm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

/// Static description of a status code; never null.
///
/// # Safety
///
/// The returned pointer references a static string and must not be freed.
#[no_mangle]
pub unsafe extern "C" fn ckm_status_message(status: u32) -> *const c_char {
    let text: &'static [u8] = match status {
        0 => b"ok\0",
        1 => b"null pointer\0",
        2 => b"invalid argument\0",
        3 => b"invalid data\0",
        4 => b"empty kernel neighborhood\0",
        5 => b"cumulative hazard divergence\0",
        6 => b"inference guard violation\0",
        7 => b"numeric failure\0",
        8 => b"internal error\0",
        _ => b"unknown status\0",
    };
    text.as_ptr().cast()
}

/// Plug-in bandwidth `3 n^(-1/7)`; NaN when `n` is zero.
///
/// # Safety
///
/// Always safe; marked unsafe only for signature uniformity of the binding.
#[no_mangle]
pub unsafe extern "C" fn ckm_default_bandwidth(n: usize) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    default_bandwidth(n)
}

/// Builds a sample from parallel arrays.
///
/// `y` holds durations, `status` holds censoring indicators (0 censored,
/// 1 uncensored), and `x` holds covariates row-major with `dim` entries per
/// observation. On success writes a handle to `out` and returns
/// `CKM_STATUS_OK`.
///
/// # Safety
///
/// `y` and `status` must point to `n` readable elements, `x` to `n * dim`
/// readable elements, and `out` to a writable handle slot. The handle must
/// be released with [`ckm_sample_free`].
#[no_mangle]
pub unsafe extern "C" fn ckm_sample_new(
    y: *const f64,
    status: *const u8,
    x: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut CkmSample,
) -> CkmStatus {
    if out.is_null() {
        return null_pointer("out");
    }
    if y.is_null() || status.is_null() || x.is_null() {
        return null_pointer("y, status and x");
    }
    let ys = std::slice::from_raw_parts(y, n);
    let statuses = std::slice::from_raw_parts(status, n);
    let xs = std::slice::from_raw_parts(x, n * dim);
    guarded(|| {
        let mut observations = Vec::with_capacity(n);
        for i in 0..n {
            let delta = match statuses[i] {
                0 => false,
                1 => true,
                other => {
                    return fail(Error::NonBinaryStatus {
                        row: i,
                        value: f64::from(other),
                    })
                }
            };
            observations.push(Observation {
                y: ys[i],
                delta,
                x: xs[i * dim..(i + 1) * dim].to_vec(),
            });
        }
        match CensoredSample::new(observations) {
            Ok(sample) => {
                *out = Box::into_raw(Box::new(CkmSample(sample)));
                CkmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a sample handle; null is ignored.
///
/// # Safety
///
/// `sample` must be null or a handle from [`ckm_sample_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ckm_sample_free(sample: *mut CkmSample) {
    if !sample.is_null() {
        drop(Box::from_raw(sample));
    }
}

/// Builds a scenario covariate set from a row-major array of `n` rows with
/// `dim` entries each.
///
/// # Safety
///
/// `x` must point to `n * dim` readable elements and `out` to a writable
/// handle slot. The handle must be released with [`ckm_scenario_free`].
#[no_mangle]
pub unsafe extern "C" fn ckm_scenario_new(
    x: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut CkmScenario,
) -> CkmStatus {
    if out.is_null() {
        return null_pointer("out");
    }
    if x.is_null() {
        return null_pointer("x");
    }
    let xs = std::slice::from_raw_parts(x, n * dim);
    guarded(|| {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| xs[i * dim..(i + 1) * dim].to_vec()).collect();
        match CounterfactualCovariates::new(rows) {
            Ok(cov) => {
                *out = Box::into_raw(Box::new(CkmScenario(cov)));
                CkmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Releases a scenario handle; null is ignored.
///
/// # Safety
///
/// `scenario` must be null or a handle from [`ckm_scenario_new`] not yet
/// freed.
#[no_mangle]
pub unsafe extern "C" fn ckm_scenario_free(scenario: *mut CkmScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Product-limit distribution estimate evaluated at `len` times.
///
/// # Safety
///
/// `sample` must be a live handle, `ts` must point to `len` readable
/// elements, and `out_f` to `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn ckm_kaplan_meier(
    sample: *const CkmSample,
    ts: *const f64,
    len: usize,
    out_f: *mut f64,
) -> CkmStatus {
    if sample.is_null() {
        return null_pointer("sample");
    }
    if ts.is_null() || out_f.is_null() {
        return null_pointer("ts and out_f");
    }
    let sample = &(*sample).0;
    let times = std::slice::from_raw_parts(ts, len);
    let out = std::slice::from_raw_parts_mut(out_f, len);
    guarded(|| {
        let curve = kaplan_meier(sample);
        for (slot, &t) in out.iter_mut().zip(times) {
            *slot = curve.eval(t);
        }
        CkmStatus::Ok
    })
}

/// Scenario-averaged conditional distribution estimate at `len` times.
///
/// `kernel` and `variant` take `CkmKernel` and `CkmVariant` values. Rows
/// whose kernel neighborhood is empty fail the call.
///
/// # Safety
///
/// `sample` and `scenario` must be live handles, `ts` must point to `len`
/// readable elements, and `out_f` to `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn ckm_counterfactual_cdf(
    sample: *const CkmSample,
    scenario: *const CkmScenario,
    ts: *const f64,
    len: usize,
    h: f64,
    kernel: u32,
    variant: u32,
    out_f: *mut f64,
) -> CkmStatus {
    if sample.is_null() || scenario.is_null() {
        return null_pointer("sample and scenario");
    }
    if ts.is_null() || out_f.is_null() {
        return null_pointer("ts and out_f");
    }
    let sample = &(*sample).0;
    let scenario = &(*scenario).0;
    let times = std::slice::from_raw_parts(ts, len);
    let out = std::slice::from_raw_parts_mut(out_f, len);
    guarded(|| {
        let spec = match kernel_of(kernel, sample.dim()) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let variant = match variant_of(variant) {
            Ok(v) => v,
            Err(status) => return status,
        };
        match counterfactual_cdf(
            sample,
            scenario,
            times,
            h,
            &spec,
            variant,
            EmptyNeighborhoodPolicy::Fail,
        ) {
            Ok(estimate) => {
                out.copy_from_slice(&estimate.values);
                CkmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Distribution and cumulative-hazard policy effects at `len` times.
///
/// `ts` must be finite, nonnegative and strictly increasing. `hazard` takes
/// `CkmHazard` values and `isotonize` is a boolean flag. Divergent hazards
/// fail the call; there is no truncating mode here because the output
/// buffers have a fixed length.
///
/// # Safety
///
/// `sample` and `scenario` must be live handles, `ts` must point to `len`
/// readable elements, and `out_delta_f` and `out_delta_lambda` to `len`
/// writable elements each.
#[no_mangle]
pub unsafe extern "C" fn ckm_policy_effect(
    sample: *const CkmSample,
    scenario: *const CkmScenario,
    ts: *const f64,
    len: usize,
    h: f64,
    kernel: u32,
    variant: u32,
    hazard: u32,
    isotonize: u8,
    out_delta_f: *mut f64,
    out_delta_lambda: *mut f64,
) -> CkmStatus {
    if sample.is_null() || scenario.is_null() {
        return null_pointer("sample and scenario");
    }
    if ts.is_null() || out_delta_f.is_null() || out_delta_lambda.is_null() {
        return null_pointer("ts and output buffers");
    }
    let sample = &(*sample).0;
    let scenario = &(*scenario).0;
    let times = std::slice::from_raw_parts(ts, len);
    let out_f = std::slice::from_raw_parts_mut(out_delta_f, len);
    let out_lambda = std::slice::from_raw_parts_mut(out_delta_lambda, len);
    guarded(|| {
        let spec = match kernel_of(kernel, sample.dim()) {
            Ok(s) => s,
            Err(status) => return status,
        };
        let options = PolicyEffectOptions {
            variant: match variant_of(variant) {
                Ok(v) => v,
                Err(status) => return status,
            },
            hazard: match hazard_of(hazard) {
                Ok(m) => m,
                Err(status) => return status,
            },
            policy: EmptyNeighborhoodPolicy::Fail,
            isotonize: isotonize != 0,
            truncate_on_divergence: false,
        };
        let grid = match Grid::new(times.to_vec()) {
            Ok(g) => g,
            Err(e) => return fail(e),
        };
        match policy_effects(sample, scenario, &grid, h, &spec, &options) {
            Ok(curves) => {
                out_f.copy_from_slice(&curves.delta_f);
                out_lambda.copy_from_slice(&curves.delta_lambda);
                CkmStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Pointwise variance of the product-limit estimate at `len` times.
///
/// Uses the influence-function plug-in with evaluation guarded at the
/// `guard_prob` quantile of the uncensored durations; times beyond the guard
/// fail the call.
///
/// # Safety
///
/// `sample` must be a live handle, `ts` must point to `len` readable
/// elements, and `out_var` to `len` writable elements.
#[no_mangle]
pub unsafe extern "C" fn ckm_km_variance(
    sample: *const CkmSample,
    ts: *const f64,
    len: usize,
    guard_prob: f64,
    out_var: *mut f64,
) -> CkmStatus {
    if sample.is_null() {
        return null_pointer("sample");
    }
    if ts.is_null() || out_var.is_null() {
        return null_pointer("ts and out_var");
    }
    let sample = &(*sample).0;
    let times = std::slice::from_raw_parts(ts, len);
    let out = std::slice::from_raw_parts_mut(out_var, len);
    guarded(|| {
        let ctx = match InfluenceContext::unconditional(sample, guard_prob) {
            Ok(ctx) => ctx,
            Err(e) => return fail(e),
        };
        let mut values = Vec::with_capacity(len);
        for &t in times {
            match km_variance_at(&ctx, t) {
                Ok(v) => values.push(v),
                Err(e) => return fail(e),
            }
        }
        out.copy_from_slice(&values);
        CkmStatus::Ok
    })
}
