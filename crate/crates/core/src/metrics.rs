//! Evaluation metrics between true and estimated log-mortality schedules.
//!
//! RBias keeps the sign of (true - estimate)/true exactly as written, so its
//! sign flips with the sign of the true log-rate (negative for rates below 1).

use crate::error::{Error, Result};

/// Summary of one schedule comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRow {
    /// Mean signed relative error (1/A) Σ (θ - θ̂)/θ.
    pub rbias: f64,
    /// Root of the mean squared error √[(1/A) Σ (θ - θ̂)²].
    pub rmse: f64,
    /// Mean absolute relative error (1/A) Σ |(θ - θ̂)/θ|.
    pub mape: f64,
    /// Number of age cells that entered the averages.
    pub n_ages_used: usize,
}

/// Compares two complete log-schedules over every age cell.
pub fn evaluate(true_log_rates: &[f64], estimated_log_rates: &[f64]) -> Result<MetricsRow> {
    if true_log_rates.len() != estimated_log_rates.len() {
        return Err(Error::Validation(format!(
            "schedule lengths differ: {} vs {}",
            true_log_rates.len(),
            estimated_log_rates.len()
        )));
    }
    if true_log_rates.is_empty() {
        return Err(Error::Validation("empty schedules".into()));
    }
    accumulate(true_log_rates.iter().copied().zip(estimated_log_rates.iter().copied()).enumerate())
}

/// Compares against a partially observed schedule: `None` cells are excluded
/// and `n_ages_used` reports how many cells remained.
pub fn evaluate_partial(
    true_log_rates: &[Option<f64>],
    estimated_log_rates: &[f64],
) -> Result<MetricsRow> {
    if true_log_rates.len() != estimated_log_rates.len() {
        return Err(Error::Validation(format!(
            "schedule lengths differ: {} vs {}",
            true_log_rates.len(),
            estimated_log_rates.len()
        )));
    }
    let pairs = true_log_rates
        .iter()
        .zip(estimated_log_rates.iter())
        .enumerate()
        .filter_map(|(x, (t, e))| t.map(|t| (x, (t, *e))));
    accumulate(pairs)
}

fn accumulate(pairs: impl Iterator<Item = (usize, (f64, f64))>) -> Result<MetricsRow> {
    let mut sum_rel = 0.0;
    let mut sum_sq = 0.0;
    let mut sum_abs_rel = 0.0;
    let mut n = 0usize;
    for (age, (t, e)) in pairs {
        if t == 0.0 {
            return Err(Error::DegenerateDenominator { age });
        }
        let diff = t - e;
        let rel = diff / t;
        sum_rel += rel;
        sum_sq += diff * diff;
        sum_abs_rel += rel.abs();
        n += 1;
    }
    if n == 0 {
        return Err(Error::InsufficientData("no cells to evaluate".into()));
    }
    let a = n as f64;
    Ok(MetricsRow {
        rbias: sum_rel / a,
        rmse: (sum_sq / a).sqrt(),
        mape: sum_abs_rel / a,
        n_ages_used: n,
    })
}
