//! Nonparametric estimation for right-censored duration data.
//!
//! The crate estimates distribution and cumulative-hazard curves for an
//! observed duration subject to right censoring, both unconditionally and
//! under a counterfactual covariate scenario, together with pointwise
//! confidence intervals built from influence functions. A seeded Monte Carlo
//! harness measures estimator accuracy on a known data-generating process.
//!
//! Entry points:
//!
//! * [`survival::kaplan_meier`] and [`survival::beran_conditional`] for the
//!   factual and conditional distribution estimates,
//! * [`counterfactual::counterfactual_cdf`] and
//!   [`counterfactual::policy_effects`] for scenario curves and effects,
//! * [`inference`] for covariance plug-ins and confidence intervals,
//! * [`simulation::run_study`] for the replication harness,
//! * the `ckm` binary for file-based workflows.

pub mod counterfactual;
pub mod data;
mod error;
pub mod inference;
pub mod io;
pub mod kernel;
pub mod quadrature;
pub mod simulation;
pub mod survival;

pub use error::Error;

pub type Result<T> = std::result::Result<T, Error>;
