//! Product-limit and kernel-weighted survival estimators.
//!
//! [`kaplan_meier`] computes the classic product-limit estimate of the
//! duration distribution. The running survival product is kept as an exact
//! integer ratio for as long as it fits in 64-bit significands, so in a fully
//! uncensored sample the estimate reproduces the empirical distribution
//! function bit for bit instead of drifting by an ulp per factor.
//!
//! [`beran_conditional`] is the kernel-localized version: Nadaraya-Watson
//! weights replace the uniform 1/n mass, giving an estimate of the
//! conditional distribution of the duration given covariates. Two algebraic
//! forms are supported; they agree to first order in the weights.
//!
//! Tied durations form a single risk group. The risk set at a duration
//! includes every observation with a duration at least as large, ties in both
//! status classes included.

use crate::data::{CensoredSample, StepCurve};
use crate::kernel::{nw_weights, KernelSpec};
use crate::{Error, Result};

/// Threshold below which a weighted risk set counts as empty.
const RISK_EPS: f64 = 1e-12;

/// Running product of integer ratios with exact cancellation.
///
/// Factors are pushed as `a/b` pairs and reduced eagerly; once the reduced
/// numerator or denominator would no longer be exact in an `f64`, the ratio
/// folds into a floating spill factor. While the spill is still 1, the
/// complementary probability `(den - num) / den` is a single correctly
/// rounded division.
#[derive(Debug, Clone)]
pub(crate) struct RatioAcc {
    num: u128,
    den: u128,
    spill: f64,
}

const EXACT_LIMIT: u128 = 1 << 53;

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

impl RatioAcc {
    pub(crate) fn new() -> Self {
        Self {
            num: 1,
            den: 1,
            spill: 1.0,
        }
    }

    /// Multiplies the accumulator by `a / b`; `b` must be positive.
    pub(crate) fn push(&mut self, a: u64, b: u64) {
        debug_assert!(b > 0);
        let mut a = a as u128;
        let mut b = b as u128;
        let g = gcd(a.max(1), b);
        if g > 1 {
            a /= g;
            b /= g;
        }
        let ga = gcd(a.max(1), self.den);
        a /= ga;
        self.den /= ga;
        let gb = gcd(self.num.max(1), b);
        b /= gb;
        self.num /= gb;
        self.num *= a;
        self.den *= b;
        if self.num > EXACT_LIMIT || self.den > EXACT_LIMIT {
            self.spill *= self.num as f64 / self.den as f64;
            self.num = 1;
            self.den = 1;
        }
    }

    /// Survival-scale value of the product.
    pub(crate) fn value(&self) -> f64 {
        self.spill * (self.num as f64 / self.den as f64)
    }

    /// `1 - value()`, computed without cancellation when still exact.
    pub(crate) fn complement(&self) -> f64 {
        if self.spill == 1.0 {
            (self.den - self.num) as f64 / self.den as f64
        } else {
            1.0 - self.value()
        }
    }
}

/// Product-limit estimate from presorted parallel arrays.
///
/// `ys` must be ascending with uncensored observations first at ties, the
/// canonical order of [`CensoredSample`].
pub(crate) fn km_from_parts(ys: &[f64], deltas: &[bool]) -> StepCurve {
    let n = ys.len();
    let mut acc = RatioAcc::new();
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        let mut saw_event = false;
        while j < n && ys[j] == ys[i] {
            if deltas[j] {
                saw_event = true;
                acc.push((n - j - 1) as u64, (n - j) as u64);
            }
            j += 1;
        }
        if saw_event {
            knots.push(ys[i]);
            values.push(acc.complement());
        }
        i = j;
    }
    StepCurve::new(0.0, knots, values).expect("distinct ascending event times")
}

/// Kaplan-Meier estimate of the duration distribution.
///
/// Jumps sit at distinct uncensored durations; censored spells thin the risk
/// set without adding mass. In a sample with no censoring the result equals
/// the empirical distribution function exactly.
pub fn kaplan_meier(sample: &CensoredSample) -> StepCurve {
    let ys: Vec<f64> = sample.observations().iter().map(|o| o.y).collect();
    let deltas: Vec<bool> = sample.observations().iter().map(|o| o.delta).collect();
    km_from_parts(&ys, &deltas)
}

/// Algebraic form of the conditional estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeranVariant {
    /// Survival as `exp(-hazard sum)`; never leaves `[0, 1]` for
    /// nonnegative weights.
    Exponential,
    /// Survival as a product of `1 - increment` factors.
    ProductLimit,
}

impl BeranVariant {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "exponential" => Ok(BeranVariant::Exponential),
            "product-limit" => Ok(BeranVariant::ProductLimit),
            other => Err(Error::Usage(format!(
                "unknown variant `{other}` (expected exponential or product-limit)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            BeranVariant::Exponential => "exponential",
            BeranVariant::ProductLimit => "product-limit",
        }
    }
}

/// A fitted conditional distribution plus bookkeeping.
#[derive(Debug, Clone)]
pub struct ConditionalFit {
    pub curve: StepCurve,
    /// Hazard terms skipped because the weighted risk set had vanished.
    pub degenerate_terms: usize,
}

/// Conditional distribution estimate from explicit observation weights.
///
/// `weights` pairs with the sample's canonical order and should sum to one.
/// Knots are placed at every distinct uncensored duration even when the local
/// jump is zero, so fits from different weight vectors share knot sets.
pub fn beran_from_weights(
    sample: &CensoredSample,
    weights: &[f64],
    variant: BeranVariant,
) -> Result<ConditionalFit> {
    let n = sample.len();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    let obs = sample.observations();
    // risk(g) = sum of weights with duration >= the group's duration
    let starts = sample.group_starts();
    let n_groups = starts.len() - 1;
    let mut risk = vec![0.0; n_groups + 1];
    let mut total = 0.0;
    for g in (0..n_groups).rev() {
        for j in starts[g]..starts[g + 1] {
            total += weights[j];
        }
        risk[g] = total;
    }
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut degenerate = 0usize;
    let mut hazard = 0.0;
    let mut survival = 1.0;
    for g in 0..n_groups {
        let (s, e) = (starts[g], starts[g + 1]);
        let mut saw_event = false;
        for j in s..e {
            if !obs[j].delta {
                continue;
            }
            saw_event = true;
            if risk[g].abs() < RISK_EPS {
                degenerate += 1;
                continue;
            }
            let a = weights[j] / risk[g];
            match variant {
                BeranVariant::Exponential => hazard += a,
                BeranVariant::ProductLimit => survival *= 1.0 - a,
            }
        }
        if saw_event {
            knots.push(obs[s].y);
            let f = match variant {
                BeranVariant::Exponential => 1.0 - (-hazard).exp(),
                BeranVariant::ProductLimit => 1.0 - survival,
            };
            values.push(f);
        }
    }
    let curve = StepCurve::new(0.0, knots, values)?;
    Ok(ConditionalFit {
        curve,
        degenerate_terms: degenerate,
    })
}

/// Conditional distribution of the duration given covariates `x`.
pub fn beran_conditional(
    sample: &CensoredSample,
    x: &[f64],
    h: f64,
    spec: &KernelSpec,
    variant: BeranVariant,
) -> Result<ConditionalFit> {
    let weights = nw_weights(sample, x, h, spec, None)?;
    beran_from_weights(sample, &weights, variant)
}

/// Weighted empirical distribution of the observed duration.
///
/// With `uncensored_only` set, only uncensored observations carry mass and
/// the result is the conditional subdistribution of uncensored exits.
pub fn ecdf_from_weights(
    sample: &CensoredSample,
    weights: &[f64],
    uncensored_only: bool,
) -> Result<StepCurve> {
    let n = sample.len();
    if weights.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: weights.len(),
        });
    }
    let obs = sample.observations();
    let mut knots = Vec::new();
    let mut values = Vec::new();
    let mut acc = 0.0;
    for (s, e) in sample.groups() {
        for j in s..e {
            if !uncensored_only || obs[j].delta {
                acc += weights[j];
            }
        }
        knots.push(obs[s].y);
        values.push(acc);
    }
    StepCurve::new(0.0, knots, values)
}

/// Kernel-weighted empirical distribution of the duration given `x`.
pub fn conditional_ecdf(
    sample: &CensoredSample,
    x: &[f64],
    h: f64,
    spec: &KernelSpec,
    uncensored_only: bool,
) -> Result<StepCurve> {
    let weights = nw_weights(sample, x, h, spec, None)?;
    ecdf_from_weights(sample, &weights, uncensored_only)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Observation;
    use approx::assert_abs_diff_eq;

    fn sample(pairs: &[(f64, bool)]) -> CensoredSample {
        CensoredSample::new(
            pairs
                .iter()
                .map(|&(y, delta)| Observation {
                    y,
                    delta,
                    x: vec![0.0],
                })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn km_textbook_three_points() {
        let s = sample(&[(1.0, true), (2.0, false), (3.0, true)]);
        let km = kaplan_meier(&s);
        assert_eq!(km.knots(), &[1.0, 3.0]);
        assert_abs_diff_eq!(km.eval(1.0), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(km.eval(2.5), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(km.eval(3.0), 1.0);
        assert_eq!(km.eval(0.5), 0.0);
    }

    #[test]
    fn km_without_censoring_is_the_ecdf_bitwise() {
        for n in [1usize, 2, 3, 5, 7, 12, 97] {
            let pairs: Vec<(f64, bool)> = (0..n)
                .map(|i| (0.37 + (i as f64) * 0.83, true))
                .collect();
            let s = sample(&pairs);
            let km = kaplan_meier(&s);
            for (k, &t) in km.knots().iter().enumerate() {
                let ecdf = (k + 1) as f64 / n as f64;
                assert_eq!(km.eval(t).to_bits(), ecdf.to_bits(), "n={n} k={k}");
            }
        }
    }

    #[test]
    fn km_ties_put_events_before_censorings() {
        let s = sample(&[(2.0, false), (2.0, true)]);
        let km = kaplan_meier(&s);
        assert_abs_diff_eq!(km.eval(2.0), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn ratio_accumulator_survives_overflow_by_spilling() {
        let mut acc = RatioAcc::new();
        for _ in 0..12 {
            acc.push(999_999, 1_000_000);
        }
        let expect = 0.999999f64.powi(12);
        assert_abs_diff_eq!(acc.value(), expect, epsilon = 1e-12);
        assert_abs_diff_eq!(acc.complement(), 1.0 - expect, epsilon = 1e-12);
    }

    #[test]
    fn beran_single_event_with_unit_weight() {
        let s = sample(&[(1.0, true)]);
        let exp = beran_from_weights(&s, &[1.0], BeranVariant::Exponential).unwrap();
        assert_abs_diff_eq!(exp.curve.eval(1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(exp.curve.eval(1.0), 0.632121, epsilon = 1e-6);
        let pl = beran_from_weights(&s, &[1.0], BeranVariant::ProductLimit).unwrap();
        assert_eq!(pl.curve.eval(1.0), 1.0);
    }

    #[test]
    fn beran_two_even_events_accumulates_hazard() {
        let s = sample(&[(1.0, true), (2.0, true)]);
        let fit = beran_from_weights(&s, &[0.5, 0.5], BeranVariant::Exponential).unwrap();
        assert_abs_diff_eq!(fit.curve.eval(1.0), 1.0 - (-0.5f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.curve.eval(2.0), 1.0 - (-1.5f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.curve.eval(2.0), 0.77687, epsilon = 1e-5);
    }

    #[test]
    fn beran_fully_censored_is_zero() {
        let s = sample(&[(1.0, false), (2.0, false)]);
        let fit = beran_from_weights(&s, &[0.5, 0.5], BeranVariant::Exponential).unwrap();
        assert!(fit.curve.knots().is_empty());
        assert_eq!(fit.curve.eval(10.0), 0.0);
        assert_eq!(fit.degenerate_terms, 0);
    }

    #[test]
    fn beran_counts_vanished_risk_sets() {
        let s = sample(&[(1.0, true), (2.0, true), (3.0, true)]);
        let fit = beran_from_weights(&s, &[0.5, 0.5, 0.0], BeranVariant::Exponential).unwrap();
        assert_eq!(fit.degenerate_terms, 1);
        // last term skipped, curve still has all three event knots
        assert_eq!(fit.curve.knots().len(), 3);
        assert_abs_diff_eq!(
            fit.curve.eval(3.0),
            fit.curve.eval(2.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn knots_cover_every_event_time_even_with_zero_local_weight() {
        let s = sample(&[(1.0, true), (2.0, true)]);
        let fit = beran_from_weights(&s, &[0.0, 1.0], BeranVariant::Exponential).unwrap();
        assert_eq!(fit.curve.knots(), &[1.0, 2.0]);
        assert_eq!(fit.curve.eval(1.0), 0.0);
    }

    #[test]
    fn weighted_ecdf_and_subdistribution() {
        let s = sample(&[(1.0, true), (2.0, false), (3.0, true)]);
        let w = [1.0 / 3.0; 3];
        let full = ecdf_from_weights(&s, &w, false).unwrap();
        assert_abs_diff_eq!(full.eval(2.0), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(full.eval(3.0), 1.0, epsilon = 1e-12);
        let sub = ecdf_from_weights(&s, &w, true).unwrap();
        assert_abs_diff_eq!(sub.eval(2.0), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sub.eval(3.0), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn tie_groups_share_one_risk_set() {
        // two tied events, uniform weights: a single group with risk 1
        let s = sample(&[(1.0, true), (1.0, true)]);
        let fit = beran_from_weights(&s, &[0.5, 0.5], BeranVariant::Exponential).unwrap();
        assert_eq!(fit.curve.knots().len(), 1);
        assert_abs_diff_eq!(fit.curve.eval(1.0), 1.0 - (-1.0f64).exp(), epsilon = 1e-12);
    }
}
