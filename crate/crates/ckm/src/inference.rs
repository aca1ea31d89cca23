//! Influence functions, covariance plug-ins, and pointwise intervals.
//!
//! The product-limit estimate is asymptotically linear: evaluated at `t` it
//! behaves like an average of one influence term per observation,
//!
//! ```text
//! xi(y, d; t) = (1 - F(t)) * ( 1[y <= t, d = 1] / (1 - G(y))
//!               - integral over u <= min(y, t) of
//!                   dG1(u) / ((1 - G(u)) (1 - G(u-))) )
//! ```
//!
//! where `G` is the empirical distribution of the observed duration and `G1`
//! its uncensored subdistribution. The integrand pairs the right-continuous
//! value with the left limit; that mixed pairing telescopes exactly, so the
//! direct covariance formula and the averaged-product route agree to
//! rounding, and the influence terms sum to zero over the sample.
//!
//! The counterfactual estimate adds a conditional analog per observation and
//! a covariate-density ratio; [`sigma11_hat`], [`sigma22_hat`] and
//! [`sigma12_hat`] assemble the plug-in covariance surfaces, and
//! [`pointwise_ci`] turns a variance into a normal interval.
//!
//! Everything here is guarded: evaluation beyond the uncensored-duration
//! quantile `zeta` is refused, as is any denominator within 1e-6 of zero,
//! because the plug-ins lose all precision in those tails.

use crate::data::{CensoredSample, CounterfactualCovariates, StepCurve};
use crate::kernel::{counterfactual_density, nw_weights, sample_density, KernelSpec};
use crate::survival::{beran_from_weights, ecdf_from_weights, kaplan_meier, BeranVariant};
use crate::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};

/// Smallest denominator magnitude the plug-ins accept.
const GUARD_EPS: f64 = 1e-6;
/// Smallest density magnitude accepted in the ratio `m*(x) / m(x)`.
const DENSITY_EPS: f64 = 1e-12;
/// Default probability level for the evaluation guard `zeta`.
pub const DEFAULT_GUARD_PROB: f64 = 0.95;

/// Step curve that refuses evaluation at or beyond a degenerate knot.
#[derive(Debug, Clone)]
pub struct GuardedCurve {
    curve: StepCurve,
    guard_from: Option<f64>,
    guard_value: f64,
}

impl GuardedCurve {
    pub fn eval(&self, t: f64) -> Result<f64> {
        if let Some(g) = self.guard_from {
            if t >= g {
                return Err(Error::GuardViolation {
                    quantity: "survival denominator",
                    value: self.guard_value,
                    t,
                });
            }
        }
        Ok(self.curve.eval(t))
    }
}

/// Cumulative inner integral `int dG1 / ((1 - G)(1 - G-))` as a guarded
/// curve in its upper limit.
///
/// `f_y` and `f_sub` must share knots, as the weighted empirical builders
/// guarantee. Knots carrying no subdistribution mass never trip the guard;
/// the first massive knot with a degenerate denominator truncates the curve
/// and arms it.
fn inner_integral_curve(f_y: &StepCurve, f_sub: &StepCurve) -> GuardedCurve {
    let n = f_sub.knots().len();
    let mut knots = Vec::with_capacity(n);
    let mut values = Vec::with_capacity(n);
    let mut acc = 0.0;
    let mut guard_from = None;
    let mut guard_value = 0.0;
    for i in 0..n {
        let u = f_sub.knots()[i];
        let jump = f_sub.values()[i] - f_sub.value_before(i);
        if jump != 0.0 {
            let denom_r = 1.0 - f_y.values()[i];
            let denom_l = 1.0 - f_y.value_before(i);
            if denom_r.abs() < GUARD_EPS || denom_l.abs() < GUARD_EPS {
                guard_from = Some(u);
                guard_value = if denom_r.abs() < denom_l.abs() {
                    denom_r
                } else {
                    denom_l
                };
                break;
            }
            acc += jump / (denom_r * denom_l);
        }
        knots.push(u);
        values.push(acc);
    }
    let curve = StepCurve::new(0.0, knots, values).expect("knots inherited from a valid curve");
    GuardedCurve {
        curve,
        guard_from,
        guard_value,
    }
}

/// Order statistic guard: the `ceil(prob * m)`-th smallest uncensored
/// duration, with `m` the number of uncensored observations.
pub fn guard_quantile(sample: &CensoredSample, prob: f64) -> Result<f64> {
    if !(prob > 0.0 && prob <= 1.0) || !prob.is_finite() {
        return Err(Error::Usage(format!(
            "guard probability must lie in (0, 1], got {prob}"
        )));
    }
    let mut unc: Vec<f64> = sample
        .observations()
        .iter()
        .filter(|o| o.delta)
        .map(|o| o.y)
        .collect();
    if unc.is_empty() {
        return Err(Error::NoUncensored);
    }
    unc.sort_by(|a, b| a.partial_cmp(b).expect("durations are finite"));
    let k = (prob * unc.len() as f64).ceil() as usize;
    Ok(unc[k.clamp(1, unc.len()) - 1])
}

/// Per-observation conditional machinery for the counterfactual parameter.
#[derive(Debug, Clone)]
struct ConditionalContext {
    /// Conditional duration distribution at each sample covariate.
    f_t_given_x: Vec<StepCurve>,
    /// Conditional observed-duration distribution at each sample covariate.
    f_y_given_x: Vec<StepCurve>,
    /// Inner integral curve at each sample covariate.
    inner_x: Vec<GuardedCurve>,
    /// Density ratio `m*(X_i) / m(X_i)`.
    ratio: Vec<f64>,
    /// Conditional duration distribution at each scenario covariate.
    f_t_given_xstar: Vec<StepCurve>,
    /// Scenario average of the conditional distributions.
    f_tstar: StepCurve,
}

/// Precomputed state shared by influence evaluations.
#[derive(Debug, Clone)]
pub struct InfluenceContext {
    zeta: f64,
    km: StepCurve,
    ecdf: StepCurve,
    inner0: GuardedCurve,
    ys: Vec<f64>,
    deltas: Vec<bool>,
    cond: Option<ConditionalContext>,
}

impl InfluenceContext {
    /// Context for the unconditional product-limit influence only.
    pub fn unconditional(sample: &CensoredSample, guard_prob: f64) -> Result<Self> {
        let zeta = guard_quantile(sample, guard_prob)?;
        let n = sample.len();
        let uniform = vec![1.0 / n as f64; n];
        let ecdf = ecdf_from_weights(sample, &uniform, false)?;
        let sub = ecdf_from_weights(sample, &uniform, true)?;
        let inner0 = inner_integral_curve(&ecdf, &sub);
        Ok(Self {
            zeta,
            km: kaplan_meier(sample),
            ecdf,
            inner0,
            ys: sample.observations().iter().map(|o| o.y).collect(),
            deltas: sample.observations().iter().map(|o| o.delta).collect(),
            cond: None,
        })
    }

    /// Context extended with the conditional machinery the counterfactual
    /// plug-ins need. Scenario rows must pair with sample rows one-to-one.
    pub fn with_conditionals(
        sample: &CensoredSample,
        xstar: &CounterfactualCovariates,
        h: f64,
        spec: &KernelSpec,
        variant: BeranVariant,
        guard_prob: f64,
    ) -> Result<Self> {
        let n = sample.len();
        if xstar.len() != n {
            return Err(Error::PairedRowsRequired {
                sample: n,
                xstar: xstar.len(),
            });
        }
        if xstar.dim() != sample.dim() {
            return Err(Error::DimensionMismatch {
                expected: sample.dim(),
                found: xstar.dim(),
            });
        }
        let mut ctx = Self::unconditional(sample, guard_prob)?;
        let mut f_t_given_x = Vec::with_capacity(n);
        let mut f_y_given_x = Vec::with_capacity(n);
        let mut inner_x = Vec::with_capacity(n);
        let mut ratio = Vec::with_capacity(n);
        for i in 0..n {
            let x = sample.covariate_row(i);
            let w = nw_weights(sample, x, h, spec, Some(i))?;
            let f_y = ecdf_from_weights(sample, &w, false)?;
            let f_sub = ecdf_from_weights(sample, &w, true)?;
            inner_x.push(inner_integral_curve(&f_y, &f_sub));
            f_y_given_x.push(f_y);
            f_t_given_x.push(beran_from_weights(sample, &w, variant)?.curve);
            let m_fact = sample_density(sample, x, h, spec)?;
            if m_fact.abs() < DENSITY_EPS {
                return Err(Error::EmptyNeighborhood { row: Some(i) });
            }
            let m_star = counterfactual_density(xstar, x, h, spec)?;
            ratio.push(m_star / m_fact);
        }
        let mut f_t_given_xstar = Vec::with_capacity(n);
        let mut star_values: Vec<f64> = Vec::new();
        let mut star_knots: Vec<f64> = Vec::new();
        for (i, x) in xstar.rows().iter().enumerate() {
            let w = nw_weights(sample, x, h, spec, Some(i))?;
            let fit = beran_from_weights(sample, &w, variant)?;
            if i == 0 {
                star_knots = fit.curve.knots().to_vec();
                star_values = fit.curve.values().to_vec();
            } else {
                for (acc, v) in star_values.iter_mut().zip(fit.curve.values()) {
                    *acc += v;
                }
            }
            f_t_given_xstar.push(fit.curve);
        }
        for v in &mut star_values {
            *v /= n as f64;
        }
        let f_tstar = StepCurve::new(0.0, star_knots, star_values)?;
        ctx.cond = Some(ConditionalContext {
            f_t_given_x,
            f_y_given_x,
            inner_x,
            ratio,
            f_t_given_xstar,
            f_tstar,
        });
        Ok(ctx)
    }

    pub fn zeta(&self) -> f64 {
        self.zeta
    }

    pub fn n(&self) -> usize {
        self.ys.len()
    }

    /// Product-limit estimate the influence terms expand around.
    pub fn km_curve(&self) -> &StepCurve {
        &self.km
    }

    /// Counterfactual distribution estimate, when conditionals were built.
    pub fn counterfactual_curve(&self) -> Option<&StepCurve> {
        self.cond.as_ref().map(|c| &c.f_tstar)
    }

    /// Density ratios `m*(X_i) / m(X_i)`, when conditionals were built.
    pub fn density_ratios(&self) -> Option<&[f64]> {
        self.cond.as_ref().map(|c| c.ratio.as_slice())
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if t > self.zeta {
            return Err(Error::BeyondGuard { t, zeta: self.zeta });
        }
        Ok(())
    }

    fn conditional(&self) -> Result<&ConditionalContext> {
        self.cond.as_ref().ok_or_else(|| {
            Error::Usage("influence context lacks conditional state; build with_conditionals".into())
        })
    }
}

/// Influence of a (possibly hypothetical) observation on the product-limit
/// estimate at `t`.
pub fn influence_km(ctx: &InfluenceContext, y: f64, delta: bool, t: f64) -> Result<f64> {
    ctx.check_time(t)?;
    let surv_t = 1.0 - ctx.km.eval(t);
    let first = if delta && y <= t {
        let s = 1.0 - ctx.ecdf.eval(y);
        if s.abs() < GUARD_EPS {
            return Err(Error::GuardViolation {
                quantity: "observed-duration survival",
                value: s,
                t,
            });
        }
        1.0 / s
    } else {
        0.0
    };
    let integral = ctx.inner0.eval(y.min(t))?;
    Ok(surv_t * (first - integral))
}

/// Conditional influence term for sample row `i` at `t`: the analog of
/// [`influence_km`] built from the row's conditional distributions.
pub fn influence_conditional(ctx: &InfluenceContext, i: usize, t: f64) -> Result<f64> {
    ctx.check_time(t)?;
    let cond = ctx.conditional()?;
    let y = ctx.ys[i];
    let surv_t = 1.0 - cond.f_t_given_x[i].eval(t);
    let first = if ctx.deltas[i] && y <= t {
        let s = 1.0 - cond.f_y_given_x[i].eval(y);
        if s.abs() < GUARD_EPS {
            return Err(Error::GuardViolation {
                quantity: "conditional observed-duration survival",
                value: s,
                t,
            });
        }
        1.0 / s
    } else {
        0.0
    };
    let integral = cond.inner_x[i].eval(y.min(t))?;
    Ok(surv_t * (first - integral))
}

/// First-stage influence of sample row `i` on the counterfactual estimate at
/// `t`, returned as its two addends:
///
/// * the scenario-curve deviation `F(t | X*_i) - F*(t)`, which averages to
///   zero over rows by construction, and
/// * the conditional influence term scaled by the density ratio.
pub fn influence_counterfactual(ctx: &InfluenceContext, i: usize, t: f64) -> Result<(f64, f64)> {
    ctx.check_time(t)?;
    let cond = ctx.conditional()?;
    let deviation = cond.f_t_given_xstar[i].eval(t) - cond.f_tstar.eval(t);
    let scaled = influence_conditional(ctx, i, t)? * cond.ratio[i];
    Ok((deviation, scaled))
}

/// Symmetric covariance surface on a fixed set of times.
#[derive(Debug, Clone)]
pub struct CovarianceSurface {
    ts: Vec<f64>,
    data: Vec<f64>,
}

impl CovarianceSurface {
    fn zeros(ts: Vec<f64>) -> Self {
        let n = ts.len();
        Self {
            ts,
            data: vec![0.0; n * n],
        }
    }

    pub fn ts(&self) -> &[f64] {
        &self.ts
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    /// Entry at time pair `(ts[i], ts[j])`.
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.ts.len() + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.ts.len()).map(|i| self.get(i, i)).collect()
    }

    pub fn values(&self) -> &[f64] {
        &self.data
    }

    fn add_outer(&mut self, a: &[f64], b: &[f64], scale: f64) {
        let n = self.ts.len();
        for i in 0..n {
            let ai = a[i] * scale;
            for j in 0..n {
                self.data[i * n + j] += ai * b[j];
            }
        }
    }
}

fn check_grid_times(ctx: &InfluenceContext, ts: &[f64]) -> Result<()> {
    if ts.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &t in ts {
        ctx.check_time(t)?;
    }
    Ok(())
}

/// First-stage covariance surface of the counterfactual estimate.
///
/// Two plug-in terms: the scenario-curve deviations and the density-ratio
/// scaled conditional influence terms. Their population cross term vanishes,
/// so none is estimated.
pub fn sigma11_hat(ctx: &InfluenceContext, ts: &[f64]) -> Result<CovarianceSurface> {
    check_grid_times(ctx, ts)?;
    ctx.conditional()?;
    let n = ctx.n();
    let scale = 1.0 / n as f64;
    let mut surface = CovarianceSurface::zeros(ts.to_vec());
    let mut a = vec![0.0; ts.len()];
    let mut b = vec![0.0; ts.len()];
    for i in 0..n {
        for (k, &t) in ts.iter().enumerate() {
            let (dev, scaled) = influence_counterfactual(ctx, i, t)?;
            a[k] = dev;
            b[k] = scaled;
        }
        surface.add_outer(&a, &a, scale);
        surface.add_outer(&b, &b, scale);
    }
    Ok(surface)
}

/// Covariance surface of the product-limit estimate, by the direct formula
/// `(1 - F(u)) (1 - F(u')) I0(min(u, u'))` with `I0` the inner integral.
///
/// The average of [`influence_km`] products reproduces this surface as long
/// as no duration carries both an event and a censoring; on such ties the
/// two constructions differ by a term of order tie-mass squared, and the
/// direct formula is the one shipped.
pub fn sigma22_hat(ctx: &InfluenceContext, ts: &[f64]) -> Result<CovarianceSurface> {
    check_grid_times(ctx, ts)?;
    let n = ts.len();
    let surv: Vec<f64> = ts.iter().map(|&t| 1.0 - ctx.km.eval(t)).collect();
    let inner: Vec<f64> = ts
        .iter()
        .map(|&t| ctx.inner0.eval(t))
        .collect::<Result<_>>()?;
    let mut surface = CovarianceSurface::zeros(ts.to_vec());
    for i in 0..n {
        for j in 0..n {
            let lower = if ts[i] <= ts[j] { inner[i] } else { inner[j] };
            surface.data[i * n + j] = surv[i] * surv[j] * lower;
        }
    }
    Ok(surface)
}

/// Cross-covariance surface between the counterfactual and product-limit
/// estimates.
///
/// Entry `(i, j)` pairs the counterfactual influence at `ts[i]` with the
/// product-limit influence at `ts[j]`; the surface is not symmetric. The
/// deviation addend correlates with the sample only when the scenario rows
/// are a mapping of the sample rows; `include_mapped_term` adds its
/// contribution in that case.
pub fn sigma12_hat(
    ctx: &InfluenceContext,
    ts: &[f64],
    include_mapped_term: bool,
) -> Result<CovarianceSurface> {
    check_grid_times(ctx, ts)?;
    ctx.conditional()?;
    let n = ctx.n();
    let scale = 1.0 / n as f64;
    let mut surface = CovarianceSurface::zeros(ts.to_vec());
    let mut first = vec![0.0; ts.len()];
    let mut km_inf = vec![0.0; ts.len()];
    for i in 0..n {
        for (k, &t) in ts.iter().enumerate() {
            let (dev, scaled) = influence_counterfactual(ctx, i, t)?;
            first[k] = if include_mapped_term { scaled + dev } else { scaled };
            km_inf[k] = influence_km(ctx, ctx.ys[i], ctx.deltas[i], t)?;
        }
        surface.add_outer(&first, &km_inf, scale);
    }
    Ok(surface)
}

/// Variance of the product-limit estimate at a single time: the diagonal of
/// the second-stage surface without building the whole matrix.
pub fn km_variance_at(ctx: &InfluenceContext, t: f64) -> Result<f64> {
    ctx.check_time(t)?;
    let surv = 1.0 - ctx.km.eval(t);
    Ok(surv * surv * ctx.inner0.eval(t)?)
}

/// The three covariance diagonals `(s11, s22, s12)` at a single time.
///
/// Matches the corresponding surface entries at `(t, t)`; used where only
/// pointwise bands are needed and a guard trip at one time should not poison
/// the others.
pub fn effect_variances_at(
    ctx: &InfluenceContext,
    t: f64,
    include_mapped_term: bool,
) -> Result<(f64, f64, f64)> {
    ctx.check_time(t)?;
    ctx.conditional()?;
    let n = ctx.n();
    let mut s11 = 0.0;
    let mut s22 = 0.0;
    let mut s12 = 0.0;
    for i in 0..n {
        let (dev, scaled) = influence_counterfactual(ctx, i, t)?;
        let xi = influence_km(ctx, ctx.ys[i], ctx.deltas[i], t)?;
        s11 += dev * dev + scaled * scaled;
        let b = if include_mapped_term { scaled + dev } else { scaled };
        s12 += b * xi;
        s22 += xi * xi;
    }
    let scale = 1.0 / n as f64;
    Ok((s11 * scale, s22 * scale, s12 * scale))
}

/// Variance of the distribution-scale effect `F*(t) - F(t)` from the three
/// covariance entries at `t`.
///
/// Returned unfloored; see [`pointwise_ci`] for why it can be negative.
pub fn delta_f_variance(s11: f64, s22: f64, s12: f64) -> f64 {
    s11 + s22 - 2.0 * s12
}

/// Variance of the cumulative-hazard effect at `t` by the delta method.
pub fn delta_lambda_variance(
    s11: f64,
    s22: f64,
    s12: f64,
    f_star: f64,
    f_base: f64,
    t: f64,
) -> Result<f64> {
    let surv_star = 1.0 - f_star;
    let surv_base = 1.0 - f_base;
    for (quantity, value) in [
        ("counterfactual survival", surv_star),
        ("factual survival", surv_base),
    ] {
        if value.abs() < GUARD_EPS {
            return Err(Error::GuardViolation { quantity, value, t });
        }
    }
    Ok(s11 / (surv_star * surv_star) + s22 / (surv_base * surv_base)
        - 2.0 * s12 / (surv_star * surv_base))
}

/// Two-sided normal interval `estimate -+ z * sqrt(max(variance, 0) / n)`.
///
/// Negative variance estimates are floored at zero, so the caller sees a
/// degenerate band rather than an error. Besides float cancellation, the
/// effect combination `s11 + s22 - 2 s12` can come out materially negative
/// on small mapped-scenario samples: the three entries are separate
/// plug-ins, not blocks of one positive semidefinite matrix.
pub fn pointwise_ci(estimate: f64, variance: f64, n: usize, alpha: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0 && alpha < 1.0) || !alpha.is_finite() {
        return Err(Error::InvalidAlpha { value: alpha });
    }
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let z = Normal::new(0.0, 1.0)
        .expect("standard normal parameters")
        .inverse_cdf(1.0 - alpha / 2.0);
    let half = z * (variance.max(0.0) / n as f64).sqrt();
    Ok((estimate - half, estimate + half))
}
