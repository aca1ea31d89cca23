//! Counterfactual distribution estimates and policy effect curves.
//!
//! The counterfactual distribution of the duration under a covariate
//! scenario `X*` is estimated by averaging conditional fits over the scenario
//! draws:
//!
//! ```text
//! F*(t) = (1/n*) sum_i F(t | X*_i)
//! ```
//!
//! Because every conditional fit places its knots at the same distinct
//! uncensored durations, the average is itself a step curve on that shared
//! knot set and can be formed value-by-value.
//!
//! [`policy_effects`] packages the factual and counterfactual distribution
//! estimates, their cumulative hazards, and the differences on a grid.
//! Cumulative hazards use `-log(1 - F)`, which diverges where an estimate
//! reaches one; the divergence policy is explicit rather than silent.

use crate::data::{CensoredSample, CounterfactualCovariates, Grid, StepCurve};
use crate::kernel::{nw_weights, KernelSpec};
use crate::survival::{beran_from_weights, ecdf_from_weights, km_from_parts, BeranVariant};
use crate::{Error, Result};

/// What to do with scenario rows whose kernel neighborhood holds no sample
/// mass.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmptyNeighborhoodPolicy {
    /// Return the error, identifying the offending row.
    Fail,
    /// Drop the row from the average and record it.
    Drop,
}

/// How a distribution estimate is turned into a cumulative hazard.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HazardMethod {
    /// `-log(1 - F)`; exact for the exponential-form conditional estimator.
    NegLog,
    /// Jump sum `sum dF / (1 - F-)` over the curve's own knots.
    NaIntegral,
}

impl HazardMethod {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "neg-log" => Ok(HazardMethod::NegLog),
            "na-integral" => Ok(HazardMethod::NaIntegral),
            other => Err(Error::Usage(format!(
                "unknown hazard method `{other}` (expected neg-log or na-integral)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            HazardMethod::NegLog => "neg-log",
            HazardMethod::NaIntegral => "na-integral",
        }
    }
}

/// Counterfactual distribution values on a grid, with bookkeeping.
#[derive(Debug, Clone)]
pub struct CounterfactualEstimate {
    pub values: Vec<f64>,
    /// Hazard terms skipped inside conditional fits (vanished risk sets).
    pub degenerate_terms: usize,
    /// Scenario rows dropped under [`EmptyNeighborhoodPolicy::Drop`].
    pub dropped_rows: usize,
}

pub(crate) struct GroupIndex {
    /// For each grid point, the number of duration groups with value <= t.
    pub(crate) cut_all: Vec<usize>,
    /// Restriction of `cut_all` counting only groups that contain an event.
    pub(crate) cut_events: Vec<usize>,
    /// Group index -> number of event groups at or before it.
    pub(crate) events_before: Vec<usize>,
}

pub(crate) fn group_index(sample: &CensoredSample, ts: &[f64]) -> GroupIndex {
    let obs = sample.observations();
    let starts = sample.group_starts();
    let n_groups = starts.len() - 1;
    let mut group_y = Vec::with_capacity(n_groups);
    let mut has_event = Vec::with_capacity(n_groups);
    for g in 0..n_groups {
        group_y.push(obs[starts[g]].y);
        has_event.push((starts[g]..starts[g + 1]).any(|j| obs[j].delta));
    }
    let mut events_before = vec![0usize; n_groups + 1];
    for g in 0..n_groups {
        events_before[g + 1] = events_before[g] + usize::from(has_event[g]);
    }
    let mut cut_all = Vec::with_capacity(ts.len());
    let mut cut_events = Vec::with_capacity(ts.len());
    for &t in ts {
        let idx = group_y.partition_point(|&y| y <= t);
        cut_all.push(idx);
        cut_events.push(events_before[idx]);
    }
    GroupIndex {
        cut_all,
        cut_events,
        events_before,
    }
}

const RISK_EPS: f64 = 1e-12;

/// Conditional distribution from explicit weights, evaluated on the grid
/// cut points of `index`. One linear pass; no curve allocation.
pub(crate) fn beran_cut_values(
    sample: &CensoredSample,
    weights: &[f64],
    variant: BeranVariant,
    index: &GroupIndex,
    degenerate: &mut usize,
) -> Vec<f64> {
    let starts = sample.group_starts();
    let obs = sample.observations();
    let n_groups = starts.len() - 1;
    // cumulative transform over event groups, one slot per event group
    let mut cum = Vec::with_capacity(index.events_before[n_groups]);
    let mut risk = 0.0;
    let mut risk_at = vec![0.0; n_groups];
    for g in (0..n_groups).rev() {
        for j in starts[g]..starts[g + 1] {
            risk += weights[j];
        }
        risk_at[g] = risk;
    }
    let mut hazard = 0.0;
    let mut survival = 1.0;
    for g in 0..n_groups {
        let mut saw_event = false;
        for j in starts[g]..starts[g + 1] {
            if !obs[j].delta {
                continue;
            }
            saw_event = true;
            if risk_at[g].abs() < RISK_EPS {
                *degenerate += 1;
                continue;
            }
            let a = weights[j] / risk_at[g];
            match variant {
                BeranVariant::Exponential => hazard += a,
                BeranVariant::ProductLimit => survival *= 1.0 - a,
            }
        }
        if saw_event {
            let f = match variant {
                BeranVariant::Exponential => 1.0 - (-hazard).exp(),
                BeranVariant::ProductLimit => 1.0 - survival,
            };
            cum.push(f);
        }
    }
    index
        .cut_events
        .iter()
        .map(|&k| if k == 0 { 0.0 } else { cum[k - 1] })
        .collect()
}

/// Weighted empirical distribution evaluated on the grid cut points.
pub(crate) fn ecdf_cut_values(
    sample: &CensoredSample,
    weights: &[f64],
    index: &GroupIndex,
) -> Vec<f64> {
    let starts = sample.group_starts();
    let n_groups = starts.len() - 1;
    let mut cum = Vec::with_capacity(n_groups);
    let mut acc = 0.0;
    for g in 0..n_groups {
        for j in starts[g]..starts[g + 1] {
            acc += weights[j];
        }
        cum.push(acc);
    }
    index
        .cut_all
        .iter()
        .map(|&k| if k == 0 { 0.0 } else { cum[k - 1] })
        .collect()
}

/// Counterfactual distribution on grid points.
///
/// Averages the conditional estimate at each scenario row. The average is
/// accumulated in row order, so results are deterministic for a given input
/// order.
pub fn counterfactual_cdf(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    ts: &[f64],
    h: f64,
    spec: &KernelSpec,
    variant: BeranVariant,
    policy: EmptyNeighborhoodPolicy,
) -> Result<CounterfactualEstimate> {
    if xstar.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.dim(),
            found: xstar.dim(),
        });
    }
    let index = group_index(sample, ts);
    let mut total = vec![0.0; ts.len()];
    let mut used = 0usize;
    let mut dropped = 0usize;
    let mut degenerate = 0usize;
    for (row, x) in xstar.rows().iter().enumerate() {
        let weights = match nw_weights(sample, x, h, spec, Some(row)) {
            Ok(w) => w,
            Err(Error::EmptyNeighborhood { .. }) if policy == EmptyNeighborhoodPolicy::Drop => {
                dropped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let vals = beran_cut_values(sample, &weights, variant, &index, &mut degenerate);
        for (acc, v) in total.iter_mut().zip(&vals) {
            *acc += v;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyNeighborhood { row: None });
    }
    for v in &mut total {
        *v /= used as f64;
    }
    Ok(CounterfactualEstimate {
        values: total,
        degenerate_terms: degenerate,
        dropped_rows: dropped,
    })
}

/// Counterfactual distribution as a full step curve on the shared knot set.
pub fn counterfactual_curve(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    h: f64,
    spec: &KernelSpec,
    variant: BeranVariant,
    policy: EmptyNeighborhoodPolicy,
) -> Result<(StepCurve, CounterfactualEstimate)> {
    if xstar.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.dim(),
            found: xstar.dim(),
        });
    }
    let mut knots: Option<Vec<f64>> = None;
    let mut total: Vec<f64> = Vec::new();
    let mut used = 0usize;
    let mut dropped = 0usize;
    let mut degenerate = 0usize;
    for (row, x) in xstar.rows().iter().enumerate() {
        let weights = match nw_weights(sample, x, h, spec, Some(row)) {
            Ok(w) => w,
            Err(Error::EmptyNeighborhood { .. }) if policy == EmptyNeighborhoodPolicy::Drop => {
                dropped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let fit = beran_from_weights(sample, &weights, variant)?;
        degenerate += fit.degenerate_terms;
        match &mut knots {
            None => {
                knots = Some(fit.curve.knots().to_vec());
                total = fit.curve.values().to_vec();
            }
            Some(_) => {
                for (acc, v) in total.iter_mut().zip(fit.curve.values()) {
                    *acc += v;
                }
            }
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyNeighborhood { row: None });
    }
    for v in &mut total {
        *v /= used as f64;
    }
    let curve = StepCurve::new(0.0, knots.unwrap_or_default(), total)?;
    let estimate = CounterfactualEstimate {
        values: Vec::new(),
        degenerate_terms: degenerate,
        dropped_rows: dropped,
    };
    Ok((curve, estimate))
}

/// Censoring-blind scenario estimate: weighted empirical distributions of
/// the observed duration, averaged over scenario rows.
///
/// Consistent only when censoring is absent; included as a baseline that
/// shows what ignoring censoring costs.
pub fn rothe_cdf(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    ts: &[f64],
    h: f64,
    spec: &KernelSpec,
    policy: EmptyNeighborhoodPolicy,
) -> Result<CounterfactualEstimate> {
    if xstar.dim() != sample.dim() {
        return Err(Error::DimensionMismatch {
            expected: sample.dim(),
            found: xstar.dim(),
        });
    }
    let index = group_index(sample, ts);
    let mut total = vec![0.0; ts.len()];
    let mut used = 0usize;
    let mut dropped = 0usize;
    for (row, x) in xstar.rows().iter().enumerate() {
        let weights = match nw_weights(sample, x, h, spec, Some(row)) {
            Ok(w) => w,
            Err(Error::EmptyNeighborhood { .. }) if policy == EmptyNeighborhoodPolicy::Drop => {
                dropped += 1;
                continue;
            }
            Err(e) => return Err(e),
        };
        let vals = ecdf_cut_values(sample, &weights, &index);
        for (slot, v) in total.iter_mut().zip(&vals) {
            *slot += v;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyNeighborhood { row: None });
    }
    for v in &mut total {
        *v /= used as f64;
    }
    Ok(CounterfactualEstimate {
        values: total,
        degenerate_terms: 0,
        dropped_rows: dropped,
    })
}

/// Censoring-blind scenario estimate as a step curve on all distinct
/// durations.
pub fn rothe_curve(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    h: f64,
    spec: &KernelSpec,
    policy: EmptyNeighborhoodPolicy,
) -> Result<StepCurve> {
    let mut knots: Option<Vec<f64>> = None;
    let mut total: Vec<f64> = Vec::new();
    let mut used = 0usize;
    for (row, x) in xstar.rows().iter().enumerate() {
        let weights = match nw_weights(sample, x, h, spec, Some(row)) {
            Ok(w) => w,
            Err(Error::EmptyNeighborhood { .. }) if policy == EmptyNeighborhoodPolicy::Drop => {
                continue;
            }
            Err(e) => return Err(e),
        };
        let curve = ecdf_from_weights(sample, &weights, false)?;
        match &mut knots {
            None => {
                knots = Some(curve.knots().to_vec());
                total = curve.values().to_vec();
            }
            Some(_) => {
                for (acc, v) in total.iter_mut().zip(curve.values()) {
                    *acc += v;
                }
            }
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::EmptyNeighborhood { row: None });
    }
    for v in &mut total {
        *v /= used as f64;
    }
    StepCurve::new(0.0, knots.unwrap_or_default(), total)
}

/// Infeasible benchmark: product-limit estimate on latent scenario outcomes.
///
/// Available only in simulations, where the scenario durations and statuses
/// are known. `ys` and `deltas` pair by index in any order.
pub fn oracle_cdf(ys: &[f64], deltas: &[bool]) -> Result<StepCurve> {
    if ys.is_empty() {
        return Err(Error::EmptySample);
    }
    if ys.len() != deltas.len() {
        return Err(Error::DimensionMismatch {
            expected: ys.len(),
            found: deltas.len(),
        });
    }
    for (row, &y) in ys.iter().enumerate() {
        if !y.is_finite() {
            return Err(Error::NonFinite { row, field: "y" });
        }
        if y < 0.0 {
            return Err(Error::NegativeDuration { row, value: y });
        }
    }
    let mut order: Vec<usize> = (0..ys.len()).collect();
    order.sort_by(|&a, &b| {
        ys[a]
            .partial_cmp(&ys[b])
            .expect("durations are finite")
            .then(deltas[b].cmp(&deltas[a]))
    });
    let sorted_y: Vec<f64> = order.iter().map(|&i| ys[i]).collect();
    let sorted_d: Vec<bool> = order.iter().map(|&i| deltas[i]).collect();
    Ok(km_from_parts(&sorted_y, &sorted_d))
}

/// Cumulative hazard from distribution values.
///
/// `NegLog` maps each value through `-log(1 - F)` and fails with
/// [`Error::HazardDivergence`] where `F` is within 1e-12 of one. `NaIntegral`
/// needs the full `curve` to walk its jumps: `sum dF / (1 - F-)` over knots
/// up to each requested time.
pub fn cumulative_hazard(
    values: &[f64],
    ts: &[f64],
    method: HazardMethod,
    curve: Option<&StepCurve>,
) -> Result<Vec<f64>> {
    debug_assert_eq!(values.len(), ts.len());
    match method {
        HazardMethod::NegLog => {
            let mut out = Vec::with_capacity(values.len());
            for (&f, &t) in values.iter().zip(ts) {
                if f >= 1.0 - 1e-12 {
                    return Err(Error::HazardDivergence { t });
                }
                out.push(-(-f).ln_1p());
            }
            Ok(out)
        }
        HazardMethod::NaIntegral => {
            let curve = curve.ok_or(Error::NaIntegralNeedsCurve)?;
            let knots = curve.knots();
            let values_c = curve.values();
            // prefix hazard after each knot
            let mut prefix = Vec::with_capacity(knots.len());
            let mut acc = 0.0;
            for i in 0..knots.len() {
                let before = curve.value_before(i);
                let jump = values_c[i] - before;
                let denom = 1.0 - before;
                if denom.abs() < 1e-12 {
                    return Err(Error::HazardDivergence { t: knots[i] });
                }
                acc += jump / denom;
                prefix.push(acc);
            }
            let out = ts
                .iter()
                .map(|&t| {
                    let idx = knots.partition_point(|&k| k <= t);
                    if idx == 0 {
                        0.0
                    } else {
                        prefix[idx - 1]
                    }
                })
                .collect();
            Ok(out)
        }
    }
}

/// Nondecreasing projection: running maximum then clip to `[0, 1]`.
pub fn isotonize(values: &mut [f64]) {
    let mut run = f64::NEG_INFINITY;
    for v in values.iter_mut() {
        run = run.max(*v);
        *v = run.clamp(0.0, 1.0);
    }
}

/// Factual and counterfactual curves with their differences on a grid.
#[derive(Debug, Clone)]
pub struct PolicyEffectCurves {
    pub grid: Grid,
    /// Counterfactual distribution values.
    pub f_star: Vec<f64>,
    /// Factual (product-limit) distribution values.
    pub f_base: Vec<f64>,
    /// `f_star - f_base`.
    pub delta_f: Vec<f64>,
    pub lambda_star: Vec<f64>,
    pub lambda_base: Vec<f64>,
    /// `lambda_star - lambda_base`.
    pub delta_lambda: Vec<f64>,
    pub degenerate_terms: usize,
    pub dropped_rows: usize,
    /// True when the hazard columns stop before the requested grid end
    /// because an estimate reached one.
    pub truncated: bool,
}

/// Options for [`policy_effects`].
#[derive(Debug, Clone, Copy)]
pub struct PolicyEffectOptions {
    pub variant: BeranVariant,
    pub hazard: HazardMethod,
    pub policy: EmptyNeighborhoodPolicy,
    /// Replace both distribution estimates by their nondecreasing
    /// projections before differencing.
    pub isotonize: bool,
    /// On hazard divergence, truncate the grid to the longest prefix where
    /// both hazards are finite instead of failing.
    pub truncate_on_divergence: bool,
}

impl Default for PolicyEffectOptions {
    fn default() -> Self {
        Self {
            variant: BeranVariant::Exponential,
            hazard: HazardMethod::NegLog,
            policy: EmptyNeighborhoodPolicy::Fail,
            isotonize: false,
            truncate_on_divergence: false,
        }
    }
}

/// Distribution and cumulative-hazard policy effects on a grid.
///
/// The distribution columns always cover the full grid. Hazard columns
/// either cover it too, fail on divergence, or (with
/// `truncate_on_divergence`) shrink the whole bundle to the prefix where
/// both hazards exist, so all columns stay aligned.
pub fn policy_effects(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    grid: &Grid,
    h: f64,
    spec: &KernelSpec,
    options: &PolicyEffectOptions,
) -> Result<PolicyEffectCurves> {
    let ts = grid.points();
    let star = counterfactual_cdf(sample, xstar, ts, h, spec, options.variant, options.policy)?;
    let km = crate::survival::kaplan_meier(sample);
    let mut f_star = star.values;
    let mut f_base = km.eval_on(ts);
    if options.isotonize {
        isotonize(&mut f_star);
        isotonize(&mut f_base);
    }
    let divergence_at = |vals: &[f64]| vals.iter().position(|&f| f >= 1.0 - 1e-12);
    let cut = match (divergence_at(&f_star), divergence_at(&f_base)) {
        (None, None) => ts.len(),
        (a, b) => {
            let first = a.unwrap_or(usize::MAX).min(b.unwrap_or(usize::MAX));
            if !options.truncate_on_divergence || matches!(options.hazard, HazardMethod::NaIntegral)
            {
                // NaIntegral walks curve jumps, not grid values; let it
                // decide divergence itself below
                if matches!(options.hazard, HazardMethod::NegLog) {
                    return Err(Error::HazardDivergence { t: ts[first] });
                }
                ts.len()
            } else {
                first
            }
        }
    };
    if cut == 0 {
        return Err(Error::HazardDivergence { t: ts[0] });
    }
    let truncated = cut < ts.len();
    let grid_out = if truncated {
        grid.truncated(cut)
    } else {
        grid.clone()
    };
    let ts_out = grid_out.points();
    f_star.truncate(cut);
    f_base.truncate(cut);
    let lambda_star = match options.hazard {
        HazardMethod::NegLog => cumulative_hazard(&f_star, ts_out, HazardMethod::NegLog, None)?,
        HazardMethod::NaIntegral => {
            let (curve, _) = counterfactual_curve(
                sample,
                xstar,
                h,
                spec,
                options.variant,
                options.policy,
            )?;
            cumulative_hazard(&f_star, ts_out, HazardMethod::NaIntegral, Some(&curve))?
        }
    };
    let lambda_base = match options.hazard {
        HazardMethod::NegLog => cumulative_hazard(&f_base, ts_out, HazardMethod::NegLog, None)?,
        HazardMethod::NaIntegral => {
            cumulative_hazard(&f_base, ts_out, HazardMethod::NaIntegral, Some(&km))?
        }
    };
    let delta_f: Vec<f64> = f_star.iter().zip(&f_base).map(|(a, b)| a - b).collect();
    let delta_lambda: Vec<f64> = lambda_star
        .iter()
        .zip(&lambda_base)
        .map(|(a, b)| a - b)
        .collect();
    Ok(PolicyEffectCurves {
        grid: grid_out,
        f_star,
        f_base,
        delta_f,
        lambda_star,
        lambda_base,
        delta_lambda,
        degenerate_terms: star.degenerate_terms,
        dropped_rows: star.dropped_rows,
        truncated,
    })
}
