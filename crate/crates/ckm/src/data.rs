//! Domain types for right-censored duration data.
//!
//! * [`Observation`] / [`CensoredSample`]: one spell per row, holding the
//!   observed duration `y = min(T, C)`, the status flag `delta = 1[T <= C]`,
//!   and a covariate vector.
//! * [`CounterfactualCovariates`]: the covariate draws the counterfactual
//!   distribution is evaluated under.
//! * [`StepCurve`]: a right-continuous step function with left limits; every
//!   estimator in this crate returns one.
//! * [`Grid`]: strictly increasing evaluation times.
//!
//! A `CensoredSample` is canonically sorted on construction: ascending in
//! `y`, uncensored before censored at exact ties. Ties carry zero probability
//! under a continuous model, so the order is a convention; fixing one keeps
//! every downstream product deterministic.

use crate::{Error, Result};

/// One observed spell.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    /// Observed duration, `min(T, C)`; finite and nonnegative.
    pub y: f64,
    /// True when the spell ended uncensored (`T <= C`).
    pub delta: bool,
    /// Covariates, length equal to the sample dimension.
    pub x: Vec<f64>,
}

/// A validated, canonically sorted censored sample.
#[derive(Debug, Clone)]
pub struct CensoredSample {
    observations: Vec<Observation>,
    dim: usize,
    /// Start index of each run of tied durations, with a trailing sentinel
    /// equal to `len()`. Estimators walk these groups.
    group_starts: Vec<usize>,
    uncensored: usize,
    /// Covariates flattened row-major for tight kernel loops.
    x_flat: Vec<f64>,
}

impl CensoredSample {
    /// Validates and sorts the observations (ascending `y`, uncensored first
    /// at ties). Row indices in errors refer to the input order.
    pub fn new(mut observations: Vec<Observation>) -> Result<Self> {
        if observations.is_empty() {
            return Err(Error::EmptySample);
        }
        let dim = observations[0].x.len();
        if dim == 0 {
            return Err(Error::RaggedCovariates {
                row: 0,
                expected: 1,
                found: 0,
            });
        }
        for (row, obs) in observations.iter().enumerate() {
            if !obs.y.is_finite() {
                return Err(Error::NonFinite { row, field: "y" });
            }
            if obs.y < 0.0 {
                return Err(Error::NegativeDuration { row, value: obs.y });
            }
            if obs.x.len() != dim {
                return Err(Error::RaggedCovariates {
                    row,
                    expected: dim,
                    found: obs.x.len(),
                });
            }
            if obs.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, field: "x" });
            }
        }
        observations.sort_by(|a, b| {
            a.y.partial_cmp(&b.y)
                .expect("durations are finite")
                .then(b.delta.cmp(&a.delta))
        });
        let n = observations.len();
        let mut group_starts = Vec::new();
        for i in 0..n {
            if i == 0 || observations[i].y > observations[i - 1].y {
                group_starts.push(i);
            }
        }
        group_starts.push(n);
        let uncensored = observations.iter().filter(|o| o.delta).count();
        let mut x_flat = Vec::with_capacity(n * dim);
        for obs in &observations {
            x_flat.extend_from_slice(&obs.x);
        }
        Ok(Self {
            observations,
            dim,
            group_starts,
            uncensored,
            x_flat,
        })
    }

    /// Builds a sample from parallel columns; `delta` entries must be exactly
    /// 0 or 1.
    pub fn from_columns(y: &[f64], delta: &[f64], x_rows: Vec<Vec<f64>>) -> Result<Self> {
        if y.len() != delta.len() || y.len() != x_rows.len() {
            return Err(Error::DimensionMismatch {
                expected: y.len(),
                found: delta.len().min(x_rows.len()),
            });
        }
        let mut observations = Vec::with_capacity(y.len());
        for (row, ((&yi, &di), xi)) in y.iter().zip(delta).zip(x_rows).enumerate() {
            let delta = if di == 0.0 {
                false
            } else if di == 1.0 {
                true
            } else {
                return Err(Error::NonBinaryStatus { row, value: di });
            };
            observations.push(Observation {
                y: yi,
                delta,
                x: xi,
            });
        }
        Self::new(observations)
    }

    pub fn len(&self) -> usize {
        self.observations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.observations.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Observations in canonical order.
    pub fn observations(&self) -> &[Observation] {
        &self.observations
    }

    pub fn uncensored_count(&self) -> usize {
        self.uncensored
    }

    pub fn max_y(&self) -> f64 {
        self.observations[self.len() - 1].y
    }

    /// Covariate row `i` in canonical order.
    pub fn covariate_row(&self, i: usize) -> &[f64] {
        &self.x_flat[i * self.dim..(i + 1) * self.dim]
    }

    pub(crate) fn group_starts(&self) -> &[usize] {
        &self.group_starts
    }

    /// Indices of tied-duration runs as `(start, end)` pairs.
    pub(crate) fn groups(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.group_starts.windows(2).map(|w| (w[0], w[1]))
    }
}

/// Covariate draws defining the counterfactual scenario.
#[derive(Debug, Clone)]
pub struct CounterfactualCovariates {
    rows: Vec<Vec<f64>>,
    dim: usize,
}

impl CounterfactualCovariates {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::EmptyCovariates);
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::RaggedCovariates {
                row: 0,
                expected: 1,
                found: 0,
            });
        }
        for (row, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::RaggedCovariates {
                    row,
                    expected: dim,
                    found: r.len(),
                });
            }
            if r.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, field: "x" });
            }
        }
        Ok(Self { rows, dim })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Right-continuous step function with left limits.
///
/// The curve equals `initial` on `(-inf, knots[0])` and `values[i]` on
/// `[knots[i], knots[i+1])`. Evaluation is a binary search, so curves built
/// once can be queried cheaply on any grid.
#[derive(Debug, Clone, PartialEq)]
pub struct StepCurve {
    initial: f64,
    knots: Vec<f64>,
    values: Vec<f64>,
}

impl StepCurve {
    pub fn new(initial: f64, knots: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if knots.len() != values.len() {
            return Err(Error::CurveShape {
                knots: knots.len(),
                values: values.len(),
            });
        }
        if !initial.is_finite() {
            return Err(Error::CurveValues { index: 0 });
        }
        for i in 0..knots.len() {
            if !knots[i].is_finite() || (i > 0 && knots[i] <= knots[i - 1]) {
                return Err(Error::CurveKnots { index: i });
            }
            if !values[i].is_finite() {
                return Err(Error::CurveValues { index: i });
            }
        }
        Ok(Self {
            initial,
            knots,
            values,
        })
    }

    /// Constant curve with no knots.
    pub fn constant(value: f64) -> Self {
        Self {
            initial: value,
            knots: Vec::new(),
            values: Vec::new(),
        }
    }

    /// Right-continuous evaluation.
    pub fn eval(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= t);
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    /// Left limit `lim_{s -> t^-}`.
    pub fn left_limit(&self, t: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k < t);
        if idx == 0 {
            self.initial
        } else {
            self.values[idx - 1]
        }
    }

    pub fn eval_on(&self, ts: &[f64]) -> Vec<f64> {
        ts.iter().map(|&t| self.eval(t)).collect()
    }

    pub fn initial(&self) -> f64 {
        self.initial
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Value on the segment just before knot `index`.
    pub fn value_before(&self, index: usize) -> f64 {
        if index == 0 {
            self.initial
        } else {
            self.values[index - 1]
        }
    }
}

/// Strictly increasing evaluation times, optionally uniform.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    points: Vec<f64>,
    step: Option<f64>,
}

impl Grid {
    /// Arbitrary strictly increasing nonnegative points.
    pub fn new(points: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for i in 0..points.len() {
            let bad = !points[i].is_finite()
                || points[i] < 0.0
                || (i > 0 && points[i] <= points[i - 1]);
            if bad {
                return Err(Error::GridPoints { index: i });
            }
        }
        Ok(Self { points, step: None })
    }

    /// Uniform grid `start, start+step, ..., stop`; `stop` must sit on the
    /// lattice to within 1e-9.
    pub fn from_range(start: f64, stop: f64, step: f64) -> Result<Self> {
        let err = Error::GridRange { start, stop, step };
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 {
            return Err(err);
        }
        if stop < start {
            return Err(err);
        }
        let count = ((stop - start) / step).round() as usize + 1;
        let landing = start + (count - 1) as f64 * step;
        if (landing - stop).abs() > 1e-9 * stop.abs().max(1.0) {
            return Err(err);
        }
        let points: Vec<f64> = (0..count).map(|k| start + k as f64 * step).collect();
        let mut grid = Self::new(points)?;
        grid.step = Some(step);
        Ok(grid)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Uniform spacing, when the grid was built from a range.
    pub fn step(&self) -> Option<f64> {
        self.step
    }

    pub fn max(&self) -> f64 {
        self.points[self.points.len() - 1]
    }

    /// Prefix of the grid, keeping the step metadata.
    pub(crate) fn truncated(&self, len: usize) -> Self {
        Self {
            points: self.points[..len].to_vec(),
            step: self.step,
        }
    }
}
