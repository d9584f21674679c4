//! Estimation of smoothed complete mortality schedules for small populations.
//!
//! Three estimators over single-year-of-age death counts and exposures:
//!
//! - [`dynpoisson`]: a joint hierarchical dynamic Poisson model with
//!   random-walk intercepts and standard-schedule loadings, fit by
//!   Metropolis-within-Gibbs MCMC;
//! - [`topals`]: the TOPALS relational model, linear-spline offsets to a
//!   standard schedule fit by penalized Poisson maximum likelihood;
//! - [`dlm`]: a Gaussian local-level model on observed log-rates with Kalman
//!   filtering/smoothing and missing-data handling, as a large-population
//!   baseline.
//!
//! [`simulation`] generates synthetic populations from a reference schedule
//! and runs the cross-model benchmark; [`metrics`] scores fitted schedules
//! against the truth on the log scale.

pub mod data;
pub mod diagnostics;
pub mod dlm;
pub mod dynpoisson;
pub mod error;
pub mod math;
pub mod metrics;
pub mod simulation;
pub mod topals;

pub use data::{
    AgeGrid, FitResult, ModelKind, MortalityDataset, ObservedRates, PopulationRecord, RateCell,
    Sex, StandardSchedule,
};
pub use error::{Error, Result};
