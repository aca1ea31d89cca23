use thiserror::Error;

/// Crate-wide error type.
///
/// Estimation routines never panic on bad data; every failure mode that a
/// caller can trigger is a variant here. The CLI maps these onto distinct
/// exit codes (see the README).
#[derive(Debug, Error)]
pub enum Error {
    #[error("sample is empty")]
    EmptySample,
    #[error("row {row}: duration {value} is negative")]
    NegativeDuration { row: usize, value: f64 },
    #[error("row {row}: status must be 0 or 1, got {value}")]
    NonBinaryStatus { row: usize, value: f64 },
    #[error("row {row}: {field} is not finite")]
    NonFinite { row: usize, field: &'static str },
    #[error("row {row}: expected {expected} covariates, found {found}")]
    RaggedCovariates {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("covariate set is empty")]
    EmptyCovariates,
    #[error("covariate dimension {found} does not match expected dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("need one counterfactual covariate row per observation ({sample} observations, {xstar} rows)")]
    PairedRowsRequired { sample: usize, xstar: usize },

    #[error("step curve: {knots} knots but {values} values")]
    CurveShape { knots: usize, values: usize },
    #[error("step curve: knots must be finite and strictly increasing (index {index})")]
    CurveKnots { index: usize },
    #[error("step curve: value at index {index} is not finite")]
    CurveValues { index: usize },

    #[error("grid is empty")]
    EmptyGrid,
    #[error("grid points must be finite, nonnegative and strictly increasing (index {index})")]
    GridPoints { index: usize },
    #[error("grid range {start}:{stop}:{step} does not describe a uniform grid")]
    GridRange { start: f64, stop: f64, step: f64 },
    #[error("grids do not match: {reason}")]
    GridMismatch { reason: String },

    #[error("bandwidth {value} must be positive and finite")]
    Bandwidth { value: f64 },
    #[error("kernel expects dimension {expected}, got {found}")]
    KernelDimension { expected: usize, found: usize },
    #[error("kernel weights vanish near {}", .row.map_or_else(|| "the evaluation point".to_string(), |r| format!("counterfactual row {r}")))]
    EmptyNeighborhood { row: Option<usize> },

    #[error("cumulative hazard diverges: the CDF reaches 1 at t = {t}")]
    HazardDivergence { t: f64 },
    #[error("the integral-form hazard needs the full step curve, not grid values alone")]
    NaIntegralNeedsCurve,

    #[error("denominator guard tripped: {quantity} = {value:e} at t = {t}")]
    GuardViolation {
        quantity: &'static str,
        value: f64,
        t: f64,
    },
    #[error("evaluation time {t} exceeds the inference guard quantile {zeta}")]
    BeyondGuard { t: f64, zeta: f64 },
    #[error("sample has no uncensored observations")]
    NoUncensored,
    #[error("alpha must lie strictly between 0 and 1, got {value}")]
    InvalidAlpha { value: f64 },

    #[error("quadrature rule needs at least one node")]
    QuadratureOrder,
    #[error("quadrature did not converge: node doubling moved the result by {delta:e} (tolerance {tol:e})")]
    QuadratureNonConvergence { delta: f64, tol: f64 },

    #[error("csv schema: {message}")]
    CsvSchema { message: String },
    #[error("{path}:{line}: config error: {message}")]
    Config {
        path: String,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Usage(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
