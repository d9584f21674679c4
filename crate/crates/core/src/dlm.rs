//! Gaussian local-level model on observed log-rates, the large-population
//! comparison baseline.
//!
//! Ages with zero deaths or zero exposure have no observable log-rate and are
//! treated as missing: the filter carries the prediction through them and the
//! smoother interpolates. Observation and evolution variances are estimated by
//! maximizing the prediction-error log-likelihood.

use nalgebra::{Matrix2, RowVector2, Vector2};

use crate::data::{log_rates, naive_rates, FitResult, ModelKind, PopulationRecord, StandardSchedule};
use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Fixed-parameter specification of the local-level model
/// `y_x = level_x (+ mu * S_x) + v`, `level_x = level_{x-1} + w`.
#[derive(Debug, Clone, Copy)]
pub struct DlmSpec {
    /// Observation noise variance V.
    pub obs_variance: f64,
    /// Level evolution variance W.
    pub state_variance: f64,
    /// Prior mean of the level at the first age.
    pub initial_mean: f64,
    /// Prior variance of the level at the first age.
    pub initial_variance: f64,
    /// Include the mu * S_x term (mu carried as a static regression state).
    pub regression: bool,
}

impl DlmSpec {
    pub fn validate(&self) -> Result<()> {
        if !self.obs_variance.is_finite() || self.obs_variance <= 0.0 {
            return Err(Error::Validation(format!("V must be > 0, got {}", self.obs_variance)));
        }
        if !self.state_variance.is_finite() || self.state_variance <= 0.0 {
            return Err(Error::Validation(format!("W must be > 0, got {}", self.state_variance)));
        }
        if !self.initial_variance.is_finite() || self.initial_variance <= 0.0 {
            return Err(Error::Validation(format!(
                "C0 must be > 0, got {}",
                self.initial_variance
            )));
        }
        if !self.initial_mean.is_finite() {
            return Err(Error::Validation("m0 must be finite".into()));
        }
        Ok(())
    }
}

/// Forward pass output; predicted moments are the one-step priors the
/// smoother needs for its backward recursion.
#[derive(Debug, Clone)]
pub struct FilterOutput {
    pub filtered_means: Vec<f64>,
    pub filtered_variances: Vec<f64>,
    pub predicted_means: Vec<f64>,
    pub predicted_variances: Vec<f64>,
    pub loglik: f64,
}

/// Backward-smoothed moments of the level.
#[derive(Debug, Clone)]
pub struct SmootherOutput {
    pub smoothed_means: Vec<f64>,
    pub smoothed_variances: Vec<f64>,
}

/// Local-level Kalman filter. Missing entries skip the update step (the
/// posterior equals the prior at that age); the log-likelihood accumulates
/// one-step prediction densities over observed entries only.
pub fn kalman_filter(observations: &[Option<f64>], spec: &DlmSpec) -> Result<FilterOutput> {
    spec.validate()?;
    if observations.is_empty() {
        return Err(Error::Validation("empty observation vector".into()));
    }
    if observations.iter().all(|y| y.is_none()) {
        return Err(Error::InsufficientData("all observations missing".into()));
    }
    if observations.iter().flatten().any(|y| !y.is_finite()) {
        return Err(Error::Validation("observations must be finite or missing".into()));
    }

    let n = observations.len();
    let mut filtered_means = Vec::with_capacity(n);
    let mut filtered_variances = Vec::with_capacity(n);
    let mut predicted_means = Vec::with_capacity(n);
    let mut predicted_variances = Vec::with_capacity(n);
    let mut loglik = 0.0;

    let mut prior_mean = spec.initial_mean;
    let mut prior_var = spec.initial_variance;
    for (t, obs) in observations.iter().enumerate() {
        if t > 0 {
            prior_mean = filtered_means[t - 1];
            prior_var = filtered_variances[t - 1] + spec.state_variance;
        }
        predicted_means.push(prior_mean);
        predicted_variances.push(prior_var);
        match obs {
            Some(y) => {
                let innovation_var = prior_var + spec.obs_variance;
                let gain = prior_var / innovation_var;
                let resid = y - prior_mean;
                filtered_means.push(prior_mean + gain * resid);
                filtered_variances.push((1.0 - gain) * prior_var);
                loglik -=
                    0.5 * (LN_2PI + innovation_var.ln() + resid * resid / innovation_var);
            }
            None => {
                filtered_means.push(prior_mean);
                filtered_variances.push(prior_var);
            }
        }
    }
    Ok(FilterOutput {
        filtered_means,
        filtered_variances,
        predicted_means,
        predicted_variances,
        loglik,
    })
}

/// Backward (RTS) smoother companion to [`kalman_filter`].
pub fn kalman_smoother(filter: &FilterOutput, spec: &DlmSpec) -> Result<SmootherOutput> {
    spec.validate()?;
    let n = filter.filtered_means.len();
    if n == 0
        || filter.filtered_variances.len() != n
        || filter.predicted_means.len() != n
        || filter.predicted_variances.len() != n
    {
        return Err(Error::Validation("filter output has inconsistent lengths".into()));
    }
    let mut means = filter.filtered_means.clone();
    let mut variances = filter.filtered_variances.clone();
    for t in (0..n.saturating_sub(1)).rev() {
        let gain = filter.filtered_variances[t] / filter.predicted_variances[t + 1];
        means[t] = filter.filtered_means[t] + gain * (means[t + 1] - filter.predicted_means[t + 1]);
        variances[t] = filter.filtered_variances[t]
            + gain * gain * (variances[t + 1] - filter.predicted_variances[t + 1]);
    }
    Ok(SmootherOutput { smoothed_means: means, smoothed_variances: variances })
}

/// Moments and likelihood of a completed variance-estimated fit, on the
/// fitted-curve scale (level, plus mu * S when the regression term is on).
#[derive(Debug, Clone)]
pub struct DlmFit {
    pub filtered_means: Vec<f64>,
    pub filtered_variances: Vec<f64>,
    pub smoothed_means: Vec<f64>,
    pub smoothed_variances: Vec<f64>,
    pub loglik: f64,
    pub obs_variance: f64,
    pub state_variance: f64,
}

/// Controls for [`fit_dlm`].
#[derive(Debug, Clone, Copy)]
pub struct DlmOptions {
    /// Include the standard schedule as a static regression state.
    pub regression: bool,
    /// Search window for both variances, on the natural scale.
    pub var_lo: f64,
    pub var_hi: f64,
    /// Convergence tolerance of the variance search on the log scale.
    pub tol_log_var: f64,
    /// Prior variance of the level at the first age.
    pub initial_variance: f64,
}

impl Default for DlmOptions {
    fn default() -> Self {
        Self {
            regression: false,
            var_lo: 1e-12,
            var_hi: 1e4,
            tol_log_var: 1e-6,
            initial_variance: 25.0,
        }
    }
}

/// A fitted DLM plus the unified schedule consumed by metrics and writers.
#[derive(Debug, Clone)]
pub struct FittedDlm {
    pub dlm: DlmFit,
    pub fit_result: FitResult,
}

const MIN_OBSERVED_CELLS: usize = 5;
// Prior for the static regression coefficient on the standard: centered at a
// unit loading, diffuse enough to be dominated by any informative data.
const MU_PRIOR_MEAN: f64 = 1.0;
const MU_PRIOR_VAR: f64 = 100.0;

/// Fits the local-level DLM to a population's observed log-rates: builds the
/// observation vector (missing at zero-death and zero-exposure ages), profiles
/// (V, W) by likelihood, then smooths.
pub fn fit_dlm(
    record: &PopulationRecord,
    standard: &StandardSchedule,
    options: &DlmOptions,
) -> Result<FittedDlm> {
    if standard.n_ages() != record.n_ages() {
        return Err(Error::Validation(format!(
            "standard has {} ages, record has {}",
            standard.n_ages(),
            record.n_ages()
        )));
    }
    let observations = log_rates(&naive_rates(record));
    let n_observed = observations.iter().flatten().count();
    if n_observed < MIN_OBSERVED_CELLS {
        return Err(Error::InsufficientData(format!(
            "{n_observed} observed log-rates, need at least {MIN_OBSERVED_CELLS}"
        )));
    }
    let obs_mean =
        observations.iter().flatten().sum::<f64>() / n_observed as f64;

    let lo = options.var_lo.ln();
    let hi = options.var_hi.ln();
    let loglik_at = |log_v: f64, log_w: f64| -> f64 {
        let spec = DlmSpec {
            obs_variance: log_v.exp(),
            state_variance: log_w.exp(),
            initial_mean: obs_mean,
            initial_variance: options.initial_variance,
            regression: options.regression,
        };
        let out = if options.regression {
            regression_filter(&observations, standard.log_rates(), &spec).map(|f| f.loglik)
        } else {
            kalman_filter(&observations, &spec).map(|f| f.loglik)
        };
        out.unwrap_or(f64::NEG_INFINITY)
    };

    // Coordinate ascent with golden-section line searches on (ln V, ln W).
    let mut log_v = 0.5 * (lo + hi);
    let mut log_w = 0.5 * (lo + hi);
    for _ in 0..100 {
        let new_v = golden_max(|x| loglik_at(x, log_w), lo, hi, options.tol_log_var);
        let new_w = golden_max(|x| loglik_at(new_v, x), lo, hi, options.tol_log_var);
        let moved = (new_v - log_v).abs().max((new_w - log_w).abs());
        log_v = new_v;
        log_w = new_w;
        if moved < options.tol_log_var {
            break;
        }
    }

    let spec = DlmSpec {
        obs_variance: log_v.exp(),
        state_variance: log_w.exp(),
        initial_mean: obs_mean,
        initial_variance: options.initial_variance,
        regression: options.regression,
    };

    let dlm = if options.regression {
        let filter = regression_filter(&observations, standard.log_rates(), &spec)?;
        regression_smooth_to_curve(&filter, standard.log_rates(), &spec)?
    } else {
        let filter = kalman_filter(&observations, &spec)?;
        let smooth = kalman_smoother(&filter, &spec)?;
        DlmFit {
            filtered_means: filter.filtered_means,
            filtered_variances: filter.filtered_variances,
            smoothed_means: smooth.smoothed_means,
            smoothed_variances: smooth.smoothed_variances,
            loglik: filter.loglik,
            obs_variance: spec.obs_variance,
            state_variance: spec.state_variance,
        }
    };

    let z = 1.959_963_984_540_054; // 97.5% normal quantile
    let lower: Vec<f64> = dlm
        .smoothed_means
        .iter()
        .zip(&dlm.smoothed_variances)
        .map(|(m, v)| m - z * v.max(0.0).sqrt())
        .collect();
    let upper: Vec<f64> = dlm
        .smoothed_means
        .iter()
        .zip(&dlm.smoothed_variances)
        .map(|(m, v)| m + z * v.max(0.0).sqrt())
        .collect();
    let fit_result = FitResult::with_interval(
        record.id.clone(),
        record.sex,
        ModelKind::GaussianDlm,
        dlm.smoothed_means.clone(),
        lower,
        upper,
    );
    Ok(FittedDlm { dlm, fit_result })
}

// Golden-section search for the maximum of a unimodal f on [lo, hi].
fn golden_max(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut a = lo;
    let mut b = hi;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a) > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

// Two-state filter for the regression variant: state (level, mu) with mu
// static, observation row [1, S_x].
struct RegressionFilter {
    filtered_means: Vec<Vector2<f64>>,
    filtered_covs: Vec<Matrix2<f64>>,
    predicted_means: Vec<Vector2<f64>>,
    predicted_covs: Vec<Matrix2<f64>>,
    loglik: f64,
}

fn regression_filter(
    observations: &[Option<f64>],
    standard: &[f64],
    spec: &DlmSpec,
) -> Result<RegressionFilter> {
    spec.validate()?;
    if observations.iter().all(|y| y.is_none()) {
        return Err(Error::InsufficientData("all observations missing".into()));
    }
    let n = observations.len();
    let evolution = Matrix2::new(spec.state_variance, 0.0, 0.0, 0.0);
    let mut filtered_means = Vec::with_capacity(n);
    let mut filtered_covs = Vec::with_capacity(n);
    let mut predicted_means = Vec::with_capacity(n);
    let mut predicted_covs = Vec::with_capacity(n);
    let mut loglik = 0.0;

    let mut prior_mean = Vector2::new(spec.initial_mean, MU_PRIOR_MEAN);
    let mut prior_cov = Matrix2::new(spec.initial_variance, 0.0, 0.0, MU_PRIOR_VAR);
    for (t, obs) in observations.iter().enumerate() {
        if t > 0 {
            prior_mean = filtered_means[t - 1];
            prior_cov = filtered_covs[t - 1] + evolution;
        }
        predicted_means.push(prior_mean);
        predicted_covs.push(prior_cov);
        match obs {
            Some(y) => {
                let h = RowVector2::new(1.0, standard[t]);
                let innovation_var = (h * prior_cov * h.transpose())[(0, 0)] + spec.obs_variance;
                let gain = prior_cov * h.transpose() / innovation_var;
                let resid = y - (h * prior_mean)[(0, 0)];
                let mean = prior_mean + gain * resid;
                let cov = prior_cov - gain * h * prior_cov;
                let cov = 0.5 * (cov + cov.transpose());
                filtered_means.push(mean);
                filtered_covs.push(cov);
                loglik -=
                    0.5 * (LN_2PI + innovation_var.ln() + resid * resid / innovation_var);
            }
            None => {
                filtered_means.push(prior_mean);
                filtered_covs.push(prior_cov);
            }
        }
    }
    Ok(RegressionFilter { filtered_means, filtered_covs, predicted_means, predicted_covs, loglik })
}

fn regression_smooth_to_curve(
    filter: &RegressionFilter,
    standard: &[f64],
    spec: &DlmSpec,
) -> Result<DlmFit> {
    let n = filter.filtered_means.len();
    let mut means = filter.filtered_means.clone();
    let mut covs = filter.filtered_covs.clone();
    for t in (0..n.saturating_sub(1)).rev() {
        let pred_cov = filter.predicted_covs[t + 1];
        let inv = pred_cov.try_inverse().ok_or_else(|| {
            Error::Validation("singular predicted covariance in DLM smoother".into())
        })?;
        let gain = filter.filtered_covs[t] * inv; // transition is identity
        means[t] =
            filter.filtered_means[t] + gain * (means[t + 1] - filter.predicted_means[t + 1]);
        let cov = filter.filtered_covs[t]
            + gain * (covs[t + 1] - pred_cov) * gain.transpose();
        covs[t] = 0.5 * (cov + cov.transpose());
    }

    let curve = |mean: &Vector2<f64>, cov: &Matrix2<f64>, s: f64| -> (f64, f64) {
        let m = mean[0] + mean[1] * s;
        let v = cov[(0, 0)] + 2.0 * s * cov[(0, 1)] + s * s * cov[(1, 1)];
        (m, v)
    };
    let mut filtered_means = Vec::with_capacity(n);
    let mut filtered_variances = Vec::with_capacity(n);
    let mut smoothed_means = Vec::with_capacity(n);
    let mut smoothed_variances = Vec::with_capacity(n);
    for t in 0..n {
        let (fm, fv) = curve(&filter.filtered_means[t], &filter.filtered_covs[t], standard[t]);
        filtered_means.push(fm);
        filtered_variances.push(fv);
        let (sm, sv) = curve(&means[t], &covs[t], standard[t]);
        smoothed_means.push(sm);
        smoothed_variances.push(sv);
    }
    Ok(DlmFit {
        filtered_means,
        filtered_variances,
        smoothed_means,
        smoothed_variances,
        loglik: filter.loglik,
        obs_variance: spec.obs_variance,
        state_variance: spec.state_variance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sex;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn spec(v: f64, w: f64, m0: f64, c0: f64) -> DlmSpec {
        DlmSpec {
            obs_variance: v,
            state_variance: w,
            initial_mean: m0,
            initial_variance: c0,
            regression: false,
        }
    }

    #[test]
    fn single_observation_conjugate_update() {
        let y = 1.4;
        let out = kalman_filter(&[Some(y)], &spec(1.0, 0.5, 0.0, 1.0)).unwrap();
        assert_relative_eq!(out.filtered_means[0], y / 2.0, max_relative = 1e-12);
        assert_relative_eq!(out.filtered_variances[0], 0.5, max_relative = 1e-12);
    }

    #[test]
    fn tiny_obs_variance_tracks_observations() {
        let ys = [Some(0.3), Some(-1.2), Some(2.5), None, Some(0.9)];
        let out = kalman_filter(&ys, &spec(1e-12, 0.2, 0.0, 4.0)).unwrap();
        for (t, y) in ys.iter().enumerate() {
            if let Some(y) = y {
                assert_relative_eq!(out.filtered_means[t], *y, epsilon = 1e-6);
            }
        }
    }

    #[test]
    fn missing_entries_carry_prediction() {
        let s = spec(0.7, 0.3, 0.0, 1.0);
        let out = kalman_filter(&[Some(1.0), None, Some(0.5)], &s).unwrap();
        assert_relative_eq!(out.filtered_means[1], out.filtered_means[0]);
        assert_relative_eq!(
            out.filtered_variances[1],
            out.filtered_variances[0] + s.state_variance
        );
    }

    #[test]
    fn all_missing_is_an_error() {
        let err = kalman_filter(&[None, None], &spec(1.0, 1.0, 0.0, 1.0)).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn smoother_base_case_is_filtered() {
        let s = spec(0.4, 0.2, 0.0, 2.0);
        let filter = kalman_filter(&[Some(0.2), None, Some(-0.4)], &s).unwrap();
        let smooth = kalman_smoother(&filter, &s).unwrap();
        let last = filter.filtered_means.len() - 1;
        assert_eq!(smooth.smoothed_means[last], filter.filtered_means[last]);
        assert_eq!(smooth.smoothed_variances[last], filter.filtered_variances[last]);
    }

    // Direct conditioning of the T-dimensional joint Gaussian of the states.
    fn brute_force_smooth(
        observations: &[Option<f64>],
        s: &DlmSpec,
    ) -> (Vec<f64>, Vec<f64>, f64) {
        use nalgebra::{DMatrix, DVector};
        let t_len = observations.len();
        let mut cov = DMatrix::<f64>::zeros(t_len, t_len);
        for i in 0..t_len {
            for j in 0..t_len {
                cov[(i, j)] = s.initial_variance + s.state_variance * i.min(j) as f64;
            }
        }
        let observed: Vec<usize> =
            (0..t_len).filter(|&i| observations[i].is_some()).collect();
        let k = observed.len();
        let mut cov_yy = DMatrix::<f64>::zeros(k, k);
        for (a, &i) in observed.iter().enumerate() {
            for (b, &j) in observed.iter().enumerate() {
                cov_yy[(a, b)] = cov[(i, j)];
            }
            cov_yy[(a, a)] += s.obs_variance;
        }
        let resid = DVector::from_iterator(
            k,
            observed.iter().map(|&i| observations[i].unwrap() - s.initial_mean),
        );
        let chol = cov_yy.clone().cholesky().unwrap();
        let alpha = chol.solve(&resid);
        let mut means = Vec::with_capacity(t_len);
        let mut vars = Vec::with_capacity(t_len);
        for i in 0..t_len {
            let cross = DVector::from_iterator(k, observed.iter().map(|&j| cov[(i, j)]));
            means.push(s.initial_mean + cross.dot(&alpha));
            let tmp = chol.solve(&cross);
            vars.push(cov[(i, i)] - cross.dot(&tmp));
        }
        let mut logdet = 0.0;
        for i in 0..k {
            logdet += 2.0 * chol.l()[(i, i)].ln();
        }
        let loglik = -0.5 * (k as f64 * LN_2PI + logdet + resid.dot(&alpha));
        (means, vars, loglik)
    }

    #[test]
    fn smoother_matches_joint_gaussian_t3() {
        let s = spec(0.3, 0.15, -0.5, 2.0);
        let ys = [Some(0.1), Some(-0.9), Some(0.4)];
        let filter = kalman_filter(&ys, &s).unwrap();
        let smooth = kalman_smoother(&filter, &s).unwrap();
        let (means, vars, loglik) = brute_force_smooth(&ys, &s);
        for t in 0..3 {
            assert_relative_eq!(smooth.smoothed_means[t], means[t], epsilon = 1e-10);
            assert_relative_eq!(smooth.smoothed_variances[t], vars[t], epsilon = 1e-10);
        }
        assert_relative_eq!(filter.loglik, loglik, epsilon = 1e-10);
    }

    #[test]
    fn near_zero_state_variance_flattens_constant_data() {
        let s = spec(0.5, 1e-12, 0.0, 10.0);
        let ys: Vec<Option<f64>> = vec![Some(2.0); 6];
        let filter = kalman_filter(&ys, &s).unwrap();
        let smooth = kalman_smoother(&filter, &s).unwrap();
        let first = smooth.smoothed_means[0];
        for m in &smooth.smoothed_means {
            assert_relative_eq!(*m, first, epsilon = 1e-8);
        }
        // precision-weighted toward the constant value
        assert!((first - 2.0).abs() < 0.05);
    }

    #[test]
    fn smoothing_never_inflates_variance() {
        let s = spec(0.8, 0.05, 0.0, 3.0);
        let ys = [Some(0.2), None, None, Some(1.0), Some(0.8), None, Some(0.1)];
        let filter = kalman_filter(&ys, &s).unwrap();
        let smooth = kalman_smoother(&filter, &s).unwrap();
        for (sv, fv) in smooth.smoothed_variances.iter().zip(&filter.filtered_variances) {
            assert!(*sv <= fv + 1e-12);
        }
    }

    fn toy_record(observations: &[Option<f64>]) -> PopulationRecord {
        // build deaths/exposures whose observed log-rates equal `observations`
        let mut deaths = Vec::new();
        let mut exposures = Vec::new();
        for obs in observations {
            match obs {
                Some(v) => {
                    deaths.push(1000);
                    exposures.push(1000.0 / v.exp());
                }
                None => {
                    deaths.push(0);
                    exposures.push(100.0);
                }
            }
        }
        PopulationRecord::new("toy", Sex::Both, deaths, exposures).unwrap()
    }

    #[test]
    fn fit_refuses_sparse_records() {
        let obs: Vec<Option<f64>> = (0..20)
            .map(|i| if i < 4 { Some(-3.0) } else { None })
            .collect();
        let record = toy_record(&obs);
        let standard = StandardSchedule::new("s", Sex::Both, vec![-3.0; 20]).unwrap();
        let err = fit_dlm(&record, &standard, &DlmOptions::default()).unwrap_err();
        assert!(matches!(err, Error::InsufficientData(_)));
    }

    #[test]
    fn fit_constant_observations_pins_state_variance_at_lower_bound() {
        let obs: Vec<Option<f64>> = vec![Some(-4.0); 30];
        let record = toy_record(&obs);
        let standard = StandardSchedule::new("s", Sex::Both, vec![-4.0; 30]).unwrap();
        let options = DlmOptions::default();
        let fit = fit_dlm(&record, &standard, &options).unwrap();
        // W collapses to the bottom of the search window
        assert!(
            fit.dlm.state_variance.ln() < options.var_lo.ln() + 1.0,
            "W = {}",
            fit.dlm.state_variance
        );
        let first = fit.dlm.smoothed_means[0];
        for m in &fit.dlm.smoothed_means {
            assert_relative_eq!(*m, first, epsilon = 1e-6);
        }
    }

    #[test]
    fn fit_recovers_simulated_variances_within_factor_two() {
        let true_v: f64 = 0.04;
        let true_w: f64 = 0.01;
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let level_noise = Normal::new(0.0, true_w.sqrt()).unwrap();
        let obs_noise = Normal::new(0.0, true_v.sqrt()).unwrap();
        let mut level = -4.0;
        let mut obs = Vec::with_capacity(100);
        for _ in 0..100 {
            level += level_noise.sample(&mut rng);
            obs.push(Some(level + obs_noise.sample(&mut rng)));
        }
        let record = toy_record(&obs);
        let standard = StandardSchedule::new("s", Sex::Both, vec![-4.0; 100]).unwrap();
        let fit = fit_dlm(&record, &standard, &DlmOptions::default()).unwrap();
        assert!(fit.dlm.obs_variance > true_v / 2.0 && fit.dlm.obs_variance < true_v * 2.0,
            "V = {}", fit.dlm.obs_variance);
        assert!(fit.dlm.state_variance > true_w / 2.0 && fit.dlm.state_variance < true_w * 2.0,
            "W = {}", fit.dlm.state_variance);
    }

    #[test]
    fn regression_variant_tracks_standard_shape() {
        // true curve = 1.0 * standard + constant; sparse noise
        let standard_vals: Vec<f64> = (0..60).map(|x| -6.0 + 0.05 * x as f64).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let noise = Normal::new(0.0, 0.05).unwrap();
        let obs: Vec<Option<f64>> = standard_vals
            .iter()
            .map(|s| Some(s + 0.4 + noise.sample(&mut rng)))
            .collect();
        let record = toy_record(&obs);
        let standard = StandardSchedule::new("s", Sex::Both, standard_vals.clone()).unwrap();
        let options = DlmOptions { regression: true, ..DlmOptions::default() };
        let fit = fit_dlm(&record, &standard, &options).unwrap();
        for (m, s) in fit.dlm.smoothed_means.iter().zip(&standard_vals) {
            assert!((m - (s + 0.4)).abs() < 0.2, "fitted {m} vs {}", s + 0.4);
        }
    }
}
