//! Naive reference implementations shared by the integration suites.
//!
//! Everything here recomputes estimates from their defining formulas with
//! plain per-observation loops: fresh risk sums for every term, no shared
//! knot sets, no suffix accumulators, no curve types. Slow on purpose; the
//! point is independence from the optimized library paths.

#![allow(dead_code)]

use ckm::data::{CensoredSample, CounterfactualCovariates, Observation};
use ckm::kernel::KernelProfile;
use ckm::simulation::generate_draw;
use ckm::survival::BeranVariant;

/// Tolerance for naive-vs-library comparisons.
pub const NAIVE_TOL: f64 = 1e-10;

const RISK_EPS: f64 = 1e-12;
const GUARD_EPS: f64 = 1e-6;

pub fn sample_1d(rows: &[(f64, u8, f64)]) -> CensoredSample {
    CensoredSample::new(
        rows.iter()
            .map(|&(y, delta, x)| Observation {
                y,
                delta: delta != 0,
                x: vec![x],
            })
            .collect(),
    )
    .unwrap()
}

pub fn sample_2d(rows: &[(f64, u8, f64, f64)]) -> CensoredSample {
    CensoredSample::new(
        rows.iter()
            .map(|&(y, delta, x1, x2)| Observation {
                y,
                delta: delta != 0,
                x: vec![x1, x2],
            })
            .collect(),
    )
    .unwrap()
}

pub fn columns(sample: &CensoredSample) -> (Vec<f64>, Vec<bool>, Vec<Vec<f64>>) {
    let ys = sample.observations().iter().map(|o| o.y).collect();
    let deltas = sample.observations().iter().map(|o| o.delta).collect();
    let xs = sample.observations().iter().map(|o| o.x.clone()).collect();
    (ys, deltas, xs)
}

pub fn naive_kernel(profile: KernelProfile, u: f64) -> f64 {
    if u.abs() >= 1.0 {
        return 0.0;
    }
    let u2 = u * u;
    match profile {
        KernelProfile::Quartic4 => (15.0 / 32.0) * (3.0 - 10.0 * u2 + 7.0 * u2 * u2),
        KernelProfile::Epanechnikov => 0.75 * (1.0 - u2),
    }
}

/// Normalized product-kernel weights at `x`, or `None` when total mass near
/// `x` vanishes.
pub fn naive_nw_weights(
    xs: &[Vec<f64>],
    x: &[f64],
    h: f64,
    profile: KernelProfile,
) -> Option<Vec<f64>> {
    let raw: Vec<f64> = xs
        .iter()
        .map(|xi| {
            x.iter()
                .zip(xi)
                .map(|(a, b)| naive_kernel(profile, (a - b) / h))
                .product()
        })
        .collect();
    let total: f64 = raw.iter().sum();
    if total.abs() < 1e-12 {
        return None;
    }
    Some(raw.iter().map(|w| w / total).collect())
}

/// Kernel density estimate `(1 / (n h^d)) sum K((x - x_i) / h)`.
pub fn naive_density(xs: &[Vec<f64>], x: &[f64], h: f64, profile: KernelProfile) -> f64 {
    let sum: f64 = xs
        .iter()
        .map(|xi| {
            x.iter()
                .zip(xi)
                .map(|(a, b)| naive_kernel(profile, (a - b) / h))
                .product::<f64>()
        })
        .sum();
    sum / (xs.len() as f64 * h.powi(x.len() as i32))
}

/// Classical product-limit distribution: over distinct uncensored durations
/// `u <= t`, multiply survival by `1 - d(u) / r(u)`.
pub fn naive_km_cdf(ys: &[f64], deltas: &[bool], t: f64) -> f64 {
    let mut events: Vec<f64> = ys
        .iter()
        .zip(deltas)
        .filter(|&(&y, &d)| d && y <= t)
        .map(|(&y, _)| y)
        .collect();
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    events.dedup();
    let mut surv = 1.0;
    for u in events {
        let d = ys
            .iter()
            .zip(deltas)
            .filter(|&(&y, &del)| del && y == u)
            .count() as f64;
        let r = ys.iter().filter(|&&y| y >= u).count() as f64;
        surv *= 1.0 - d / r;
    }
    1.0 - surv
}

/// Weighted empirical distribution `sum of w_i over y_i <= t`.
pub fn naive_weighted_ecdf(ys: &[f64], weights: &[f64], t: f64) -> f64 {
    ys.iter()
        .zip(weights)
        .filter(|&(&y, _)| y <= t)
        .map(|(_, &w)| w)
        .sum()
}

/// Uncensored subdistribution `sum of w_i over y_i <= t with d_i = 1`.
pub fn naive_weighted_sub_ecdf(ys: &[f64], deltas: &[bool], weights: &[f64], t: f64) -> f64 {
    (0..ys.len())
        .filter(|&i| deltas[i] && ys[i] <= t)
        .map(|i| weights[i])
        .sum()
}

/// Conditional distribution from explicit weights, one risk sum per event.
///
/// The risk at an event is the total weight of observations with `y_j >= y_i`,
/// which ties every event in a duration bundle to the same denominator. Terms
/// whose risk is within `1e-12` of zero are skipped.
pub fn naive_beran_cdf(
    ys: &[f64],
    deltas: &[bool],
    weights: &[f64],
    variant: BeranVariant,
    t: f64,
) -> f64 {
    let n = ys.len();
    let mut hazard = 0.0;
    let mut surv = 1.0;
    for i in 0..n {
        if !deltas[i] || ys[i] > t {
            continue;
        }
        let risk: f64 = (0..n)
            .filter(|&j| ys[j] >= ys[i])
            .map(|j| weights[j])
            .sum();
        if risk.abs() < RISK_EPS {
            continue;
        }
        match variant {
            BeranVariant::Exponential => hazard += weights[i] / risk,
            BeranVariant::ProductLimit => surv *= 1.0 - weights[i] / risk,
        }
    }
    match variant {
        BeranVariant::Exponential => 1.0 - (-hazard).exp(),
        BeranVariant::ProductLimit => 1.0 - surv,
    }
}

/// Scenario distribution: the conditional estimate averaged over scenario
/// rows, each with fresh weights.
pub fn naive_counterfactual_cdf(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    h: f64,
    profile: KernelProfile,
    variant: BeranVariant,
    t: f64,
) -> f64 {
    let (ys, deltas, xs) = columns(sample);
    let total: f64 = xstar
        .rows()
        .iter()
        .map(|x| {
            let w = naive_nw_weights(&xs, x, h, profile).expect("corpus rows have mass");
            naive_beran_cdf(&ys, &deltas, &w, variant, t)
        })
        .sum();
    total / xstar.len() as f64
}

/// Censoring-blind scenario distribution: weighted empirical distributions
/// of the observed duration averaged over scenario rows.
pub fn naive_rothe_cdf(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    h: f64,
    profile: KernelProfile,
    t: f64,
) -> f64 {
    let (ys, _, xs) = columns(sample);
    let total: f64 = xstar
        .rows()
        .iter()
        .map(|x| {
            let w = naive_nw_weights(&xs, x, h, profile).expect("corpus rows have mass");
            naive_weighted_ecdf(&ys, &w, t)
        })
        .sum();
    total / xstar.len() as f64
}

/// Inner integral `sum over distinct u <= v of dG1(u) / ((1-G(u))(1-G(u-)))`
/// from explicit counting.
///
/// Panics if a knot with uncensored mass at or below `v` has a degenerate
/// denominator; callers keep evaluation below the guarded tail.
pub fn naive_inner_integral(ys: &[f64], deltas: &[bool], weights: &[f64], v: f64) -> f64 {
    let mut distinct: Vec<f64> = ys.iter().copied().filter(|&y| y <= v).collect();
    distinct.sort_by(|a, b| a.partial_cmp(b).unwrap());
    distinct.dedup();
    let mut acc = 0.0;
    for &u in &distinct {
        let jump: f64 = (0..ys.len())
            .filter(|&i| deltas[i] && ys[i] == u)
            .map(|i| weights[i])
            .sum();
        if jump == 0.0 {
            continue;
        }
        let denom_r = 1.0 - naive_weighted_ecdf(ys, weights, u);
        let denom_l: f64 = 1.0
            - ys.iter()
                .zip(weights)
                .filter(|&(&y, _)| y < u)
                .map(|(_, &w)| w)
                .sum::<f64>();
        assert!(
            denom_r.abs() >= GUARD_EPS && denom_l.abs() >= GUARD_EPS,
            "evaluation reached a guarded knot at {u}"
        );
        acc += jump / (denom_r * denom_l);
    }
    acc
}

/// Influence of observation `i` on the product-limit estimate at `t`.
pub fn naive_km_influence(ys: &[f64], deltas: &[bool], i: usize, t: f64) -> f64 {
    let n = ys.len();
    let uniform = vec![1.0 / n as f64; n];
    let surv = 1.0 - naive_km_cdf(ys, deltas, t);
    let first = if deltas[i] && ys[i] <= t {
        let s = 1.0 - naive_weighted_ecdf(ys, &uniform, ys[i]);
        assert!(s.abs() >= GUARD_EPS, "guarded survival at row {i}");
        1.0 / s
    } else {
        0.0
    };
    surv * (first - naive_inner_integral(ys, deltas, &uniform, ys[i].min(t)))
}

/// Influence of row `i` on its own conditional estimate at `t`, built from
/// the weights at the row's covariate.
pub fn naive_conditional_influence(
    sample: &CensoredSample,
    i: usize,
    t: f64,
    h: f64,
    profile: KernelProfile,
    variant: BeranVariant,
) -> f64 {
    let (ys, deltas, xs) = columns(sample);
    let w = naive_nw_weights(&xs, &xs[i], h, profile).expect("corpus rows have mass");
    let surv = 1.0 - naive_beran_cdf(&ys, &deltas, &w, variant, t);
    let first = if deltas[i] && ys[i] <= t {
        let s = 1.0 - naive_weighted_ecdf(&ys, &w, ys[i]);
        assert!(s.abs() >= GUARD_EPS, "guarded conditional survival at row {i}");
        1.0 / s
    } else {
        0.0
    };
    surv * (first - naive_inner_integral(&ys, &deltas, &w, ys[i].min(t)))
}

/// The two addends of row `i`'s influence on the scenario estimate at `t`:
/// the scenario-curve deviation and the density-ratio scaled conditional
/// term.
pub fn naive_counterfactual_influence(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    i: usize,
    t: f64,
    h: f64,
    profile: KernelProfile,
    variant: BeranVariant,
) -> (f64, f64) {
    let (ys, deltas, xs) = columns(sample);
    let w_star = naive_nw_weights(&xs, &xstar.rows()[i], h, profile).expect("mass");
    let at_star = naive_beran_cdf(&ys, &deltas, &w_star, variant, t);
    let avg = naive_counterfactual_cdf(sample, xstar, h, profile, variant, t);
    let m_fact = naive_density(&xs, &xs[i], h, profile);
    let m_star = naive_density(xstar.rows(), &xs[i], h, profile);
    let xi = naive_conditional_influence(sample, i, t, h, profile, variant);
    (at_star - avg, xi * m_star / m_fact)
}

/// First-stage covariance surface as the plain average of influence
/// products.
pub fn naive_sigma11(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    ts: &[f64],
    h: f64,
    profile: KernelProfile,
    variant: BeranVariant,
) -> Vec<Vec<f64>> {
    let n = sample.len();
    let mut out = vec![vec![0.0; ts.len()]; ts.len()];
    for i in 0..n {
        let terms: Vec<(f64, f64)> = ts
            .iter()
            .map(|&t| naive_counterfactual_influence(sample, xstar, i, t, h, profile, variant))
            .collect();
        for (a, row) in terms.iter().zip(&mut out) {
            for (b, slot) in terms.iter().zip(row.iter_mut()) {
                *slot += (a.0 * b.0 + a.1 * b.1) / n as f64;
            }
        }
    }
    out
}

/// Product-limit covariance surface by the defining formula
/// `(1 - F(u)) (1 - F(u')) I0(min(u, u'))`, evaluated with fresh loops.
///
/// The average of influence products is deliberately not used here: at a
/// duration carrying both an event and a censoring the product average
/// stops telescoping and differs from the definition by a term of order
/// tie-mass squared, so it is a different plug-in on such samples.
pub fn naive_sigma22(ys: &[f64], deltas: &[bool], ts: &[f64]) -> Vec<Vec<f64>> {
    let n = ys.len();
    let uniform = vec![1.0 / n as f64; n];
    let surv: Vec<f64> = ts
        .iter()
        .map(|&t| 1.0 - naive_km_cdf(ys, deltas, t))
        .collect();
    let mut out = vec![vec![0.0; ts.len()]; ts.len()];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, slot) in row.iter_mut().enumerate() {
            let lower = naive_inner_integral(ys, deltas, &uniform, ts[i].min(ts[j]));
            *slot = surv[i] * surv[j] * lower;
        }
    }
    out
}

/// Cross-covariance surface as the plain average of influence products.
pub fn naive_sigma12(
    sample: &CensoredSample,
    xstar: &CounterfactualCovariates,
    ts: &[f64],
    h: f64,
    profile: KernelProfile,
    variant: BeranVariant,
    include_mapped_term: bool,
) -> Vec<Vec<f64>> {
    let (ys, deltas, _) = columns(sample);
    let n = sample.len();
    let mut out = vec![vec![0.0; ts.len()]; ts.len()];
    for i in 0..n {
        let first: Vec<f64> = ts
            .iter()
            .map(|&t| {
                let (dev, scaled) =
                    naive_counterfactual_influence(sample, xstar, i, t, h, profile, variant);
                if include_mapped_term {
                    scaled + dev
                } else {
                    scaled
                }
            })
            .collect();
        let second: Vec<f64> = ts
            .iter()
            .map(|&t| naive_km_influence(&ys, &deltas, i, t))
            .collect();
        for (a, row) in first.iter().zip(&mut out) {
            for (b, slot) in second.iter().zip(row.iter_mut()) {
                *slot += a * b / n as f64;
            }
        }
    }
    out
}

/// One corpus entry: a small sample, optional paired scenario rows, the
/// bandwidth to smooth with, and evaluation times.
///
/// `ts` straddles and hits knots; `cov_ts` stays strictly below the largest
/// duration so covariance evaluation never reaches a guarded tail.
pub struct GoldenCase {
    pub name: &'static str,
    pub sample: CensoredSample,
    pub xstar: Option<CounterfactualCovariates>,
    pub h: f64,
    pub ts: Vec<f64>,
    pub cov_ts: Vec<f64>,
}

/// Small samples covering the tie and censoring layouts: bundles mixing
/// exits and withdrawals, fully censored and fully uncensored extremes,
/// duplicate covariates, a zero duration, and generated draws with their
/// paired scenario rows.
pub fn golden_corpus() -> Vec<GoldenCase> {
    let mut cases = Vec::new();

    cases.push(GoldenCase {
        name: "single-uncensored",
        sample: sample_1d(&[(1.5, 1, 0.5)]),
        xstar: Some(CounterfactualCovariates::new(vec![vec![0.6]]).unwrap()),
        h: 2.0,
        ts: vec![0.5, 1.5, 2.0],
        cov_ts: vec![0.5, 1.0],
    });

    cases.push(GoldenCase {
        name: "single-censored",
        sample: sample_1d(&[(2.0, 0, 0.3)]),
        xstar: Some(CounterfactualCovariates::new(vec![vec![0.4]]).unwrap()),
        h: 2.0,
        ts: vec![1.0, 2.0, 3.0],
        cov_ts: vec![],
    });

    cases.push(GoldenCase {
        name: "all-censored",
        sample: sample_1d(&[
            (0.5, 0, 0.1),
            (1.0, 0, 0.3),
            (1.0, 0, 0.5),
            (2.5, 0, 0.7),
            (4.0, 0, 0.9),
        ]),
        xstar: Some(
            CounterfactualCovariates::new(vec![
                vec![0.2],
                vec![0.4],
                vec![0.5],
                vec![0.6],
                vec![0.8],
            ])
            .unwrap(),
        ),
        h: 2.0,
        ts: vec![0.5, 0.75, 1.0, 2.5, 5.0],
        cov_ts: vec![],
    });

    cases.push(GoldenCase {
        name: "uncensored-ties",
        sample: sample_2d(&[
            (1.0, 1, 0.1, 0.9),
            (2.0, 1, 0.2, 0.8),
            (2.0, 1, 0.3, 0.7),
            (3.0, 1, 0.4, 0.6),
            (3.0, 1, 0.5, 0.5),
            (3.0, 1, 0.6, 0.4),
            (4.0, 1, 0.7, 0.3),
        ]),
        xstar: Some(
            CounterfactualCovariates::new(
                [0.15, 0.25, 0.35, 0.45, 0.55, 0.65, 0.75]
                    .iter()
                    .map(|&a| vec![a, 1.0 - a])
                    .collect(),
            )
            .unwrap(),
        ),
        h: 2.5,
        ts: vec![0.5, 1.0, 2.0, 2.5, 3.0, 4.0, 9.0],
        cov_ts: vec![1.0, 2.0, 2.5, 3.0, 3.5],
    });

    cases.push(GoldenCase {
        name: "mixed-tie-bundles",
        sample: sample_1d(&[
            (0.0, 1, 0.50),
            (1.0, 0, 0.10),
            (2.0, 1, 0.25),
            (2.0, 0, 0.40),
            (2.0, 1, 0.60),
            (3.5, 0, 0.75),
            (3.5, 1, 0.90),
            (5.0, 0, 0.35),
            (6.0, 1, 0.65),
            (6.0, 0, 0.15),
        ]),
        xstar: Some(
            CounterfactualCovariates::new(
                [0.55, 0.12, 0.28, 0.44, 0.66, 0.80, 0.95, 0.38, 0.70, 0.18]
                    .iter()
                    .map(|&a| vec![a])
                    .collect(),
            )
            .unwrap(),
        ),
        h: 2.0,
        ts: vec![0.0, 0.5, 1.0, 2.0, 3.0, 3.5, 5.0, 6.0, 7.0],
        cov_ts: vec![0.0, 1.5, 2.0, 3.5, 4.0],
    });

    cases.push(GoldenCase {
        name: "duplicate-covariates",
        sample: sample_1d(&[
            (1.0, 1, 0.5),
            (2.0, 0, 0.5),
            (3.0, 1, 0.5),
            (4.0, 1, 0.2),
            (5.0, 0, 0.2),
        ]),
        xstar: Some(
            CounterfactualCovariates::new(vec![
                vec![0.5],
                vec![0.5],
                vec![0.2],
                vec![0.2],
                vec![0.5],
            ])
            .unwrap(),
        ),
        h: 1.5,
        ts: vec![0.5, 1.0, 2.0, 3.0, 4.0, 5.0],
        cov_ts: vec![1.0, 2.5, 3.0],
    });

    // negative smoothing weights from the fourth-order kernel's outer lobes;
    // estimator comparisons only
    cases.push(GoldenCase {
        name: "negative-weights",
        sample: sample_1d(&[
            (1.0, 1, 0.05),
            (1.5, 0, 0.20),
            (2.0, 1, 0.35),
            (2.5, 1, 0.50),
            (3.0, 0, 0.65),
            (3.5, 1, 0.80),
            (4.0, 1, 0.95),
        ]),
        xstar: Some(
            CounterfactualCovariates::new(
                [0.10, 0.25, 0.40, 0.55, 0.70, 0.85, 0.90]
                    .iter()
                    .map(|&a| vec![a])
                    .collect(),
            )
            .unwrap(),
        ),
        h: 0.9,
        ts: vec![0.5, 1.0, 1.75, 2.0, 3.0, 4.0],
        cov_ts: vec![],
    });

    for (name, n, seed) in [
        ("draw-12", 12usize, 3u64),
        ("draw-16", 16, 2026),
        ("draw-20", 20, 11),
    ] {
        let draw = generate_draw(n, seed).unwrap();
        let ys: Vec<f64> = draw.sample.observations().iter().map(|o| o.y).collect();
        let lo = ys[0];
        let hi = ys[n - 1];
        let ts: Vec<f64> = (0..8)
            .map(|k| lo + (hi + 0.5 - lo) * k as f64 / 7.0)
            .collect();
        let cov_hi = lo + 0.6 * (hi - lo);
        let cov_ts: Vec<f64> = (0..4)
            .map(|k| lo + (cov_hi - lo) * (k + 1) as f64 / 4.0)
            .collect();
        cases.push(GoldenCase {
            name,
            sample: draw.sample,
            xstar: Some(draw.xstar),
            h: ckm::kernel::default_bandwidth(n),
            ts,
            cov_ts,
        });
    }

    cases
}
