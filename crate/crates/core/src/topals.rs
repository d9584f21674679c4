//! TOPALS relational fit: linear-spline offsets to a standard log-mortality
//! schedule, estimated by a penalized Poisson maximum likelihood.
//!
//! The offset vector alpha lives at a handful of knot ages; between knots the
//! offsets interpolate linearly through piecewise-linear hat functions. The
//! penalty shrinks first differences of alpha so sparse data fall back to a
//! level shift of the standard rather than a wiggly schedule.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::data::{AgeGrid, PopulationRecord, StandardSchedule};
use crate::error::{Error, Result};

/// Default knot ages for the complete 0..=99 grid.
pub const DEFAULT_KNOTS: [u32; 7] = [0, 1, 10, 20, 40, 70, 100];

/// Piecewise-linear hat basis over an age grid: A×K, row per age.
#[derive(Debug, Clone, PartialEq)]
pub struct SplineBasis {
    rows: Vec<Vec<f64>>,
    knots: Vec<u32>,
}

impl SplineBasis {
    pub fn n_ages(&self) -> usize {
        self.rows.len()
    }

    pub fn n_knots(&self) -> usize {
        self.knots.len()
    }

    pub fn knots(&self) -> &[u32] {
        &self.knots
    }

    /// Basis row for one age (length K).
    pub fn row(&self, age_index: usize) -> &[f64] {
        &self.rows[age_index]
    }

    /// B·alpha for the full age grid.
    pub fn mul(&self, alpha: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|row| row.iter().zip(alpha).map(|(b, a)| b * a).sum())
            .collect()
    }
}

/// Builds the hat-function basis: each column k peaks at knot t_k, rising on
/// [t_{k-1}, t_k] and falling on [t_k, t_{k+1}]. Boundary columns keep only
/// their single defined piece; no extrapolation beyond the knots.
pub fn build_basis(age_grid: &AgeGrid, knots: &[u32]) -> Result<SplineBasis> {
    if knots.len() < 2 {
        return Err(Error::InvalidKnots(format!("need at least 2 knots, got {}", knots.len())));
    }
    if knots.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidKnots(format!("knots must be strictly increasing: {knots:?}")));
    }
    let min_age = age_grid.ages()[0];
    let max_age = age_grid.max_age();
    if knots[0] > min_age {
        return Err(Error::InvalidKnots(format!(
            "first knot {} is above the minimum age {min_age}",
            knots[0]
        )));
    }
    if *knots.last().unwrap() < max_age + 1 {
        return Err(Error::InvalidKnots(format!(
            "last knot {} does not cover the age range (need >= {})",
            knots.last().unwrap(),
            max_age + 1
        )));
    }

    let k_count = knots.len();
    let mut rows = Vec::with_capacity(age_grid.len());
    for &age in age_grid.ages() {
        let x = age as f64;
        let mut row = vec![0.0; k_count];
        // span j with t_j <= age < t_{j+1}; exists by the covering checks
        let j = match knots.iter().rposition(|&t| t <= age) {
            Some(j) if j + 1 < k_count => j,
            // age == last knot can only happen if the grid reaches it; the
            // covering check requires last knot >= max_age + 1, so j+1 < K.
            _ => unreachable!("knot coverage checked above"),
        };
        let t0 = knots[j] as f64;
        let t1 = knots[j + 1] as f64;
        let w = (x - t0) / (t1 - t0);
        row[j] = 1.0 - w;
        row[j + 1] = w;
        rows.push(row);
    }
    Ok(SplineBasis { rows, knots: knots.to_vec() })
}

/// Result of a penalized-likelihood TOPALS fit.
#[derive(Debug, Clone)]
pub struct TopalsFit {
    /// Offsets at the knot ages.
    pub alpha: Vec<f64>,
    /// S + B·alpha over the age grid.
    pub fitted_log_rates: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub final_gradient_norm: f64,
    pub penalty_weight: f64,
}

/// Fit controls; `penalty_weight` scales the squared-first-difference penalty.
#[derive(Debug, Clone, Copy)]
pub struct TopalsOptions {
    pub penalty_weight: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for TopalsOptions {
    fn default() -> Self {
        Self { penalty_weight: 1.0, max_iter: 50, tol: 1e-8 }
    }
}

fn check_dims(
    deaths: &[u64],
    exposures: &[f64],
    standard: &[f64],
    basis: &SplineBasis,
    alpha: &[f64],
) -> Result<()> {
    let a = basis.n_ages();
    if deaths.len() != a || exposures.len() != a || standard.len() != a {
        return Err(Error::Validation(format!(
            "dimension mismatch: basis {a} ages, deaths {}, exposures {}, standard {}",
            deaths.len(),
            exposures.len(),
            standard.len()
        )));
    }
    if alpha.len() != basis.n_knots() {
        return Err(Error::Validation(format!(
            "alpha length {} != {} knots",
            alpha.len(),
            basis.n_knots()
        )));
    }
    Ok(())
}

/// Penalized Poisson log-likelihood (up to data-only constants):
/// Σ_x [Y_x λ_x − E_x e^{λ_x}] − (w/2) Σ_k (α_k − α_{k−1})², λ = S + Bα.
/// Ages with zero exposure contribute nothing.
pub fn topals_log_posterior(
    alpha: &[f64],
    deaths: &[u64],
    exposures: &[f64],
    standard: &[f64],
    basis: &SplineBasis,
    penalty_weight: f64,
) -> Result<f64> {
    check_dims(deaths, exposures, standard, basis, alpha)?;
    let offsets = basis.mul(alpha);
    let mut value = 0.0;
    for x in 0..basis.n_ages() {
        let e = exposures[x];
        if e == 0.0 {
            continue;
        }
        let lambda = standard[x] + offsets[x];
        value += deaths[x] as f64 * lambda - e * lambda.exp();
    }
    let mut penalty = 0.0;
    for k in 1..alpha.len() {
        let d = alpha[k] - alpha[k - 1];
        penalty += d * d;
    }
    Ok(value - 0.5 * penalty_weight * penalty)
}

/// Analytic gradient of `topals_log_posterior` with respect to alpha:
/// Bᵀ(Y − E e^{S+Bα}) − w DᵀD α.
pub fn topals_gradient(
    alpha: &[f64],
    deaths: &[u64],
    exposures: &[f64],
    standard: &[f64],
    basis: &SplineBasis,
    penalty_weight: f64,
) -> Result<Vec<f64>> {
    check_dims(deaths, exposures, standard, basis, alpha)?;
    let k_count = basis.n_knots();
    let offsets = basis.mul(alpha);
    let mut grad = vec![0.0; k_count];
    for x in 0..basis.n_ages() {
        let e = exposures[x];
        if e == 0.0 {
            continue;
        }
        let resid = deaths[x] as f64 - e * (standard[x] + offsets[x]).exp();
        for (k, b) in basis.row(x).iter().enumerate() {
            if *b != 0.0 {
                grad[k] += b * resid;
            }
        }
    }
    add_penalty_gradient(&mut grad, alpha, penalty_weight);
    Ok(grad)
}

// grad -= w DᵀD α, where (DᵀDα)_k expands over adjacent differences.
fn add_penalty_gradient(grad: &mut [f64], alpha: &[f64], w: f64) {
    let k_count = alpha.len();
    for k in 0..k_count {
        let mut v = 0.0;
        if k > 0 {
            v += alpha[k] - alpha[k - 1];
        }
        if k + 1 < k_count {
            v -= alpha[k + 1] - alpha[k];
        }
        grad[k] -= w * v;
    }
}

fn neg_hessian(
    alpha: &[f64],
    deaths_len: usize,
    exposures: &[f64],
    standard: &[f64],
    basis: &SplineBasis,
    w: f64,
) -> DMatrix<f64> {
    let k_count = basis.n_knots();
    let offsets = basis.mul(alpha);
    let mut h = DMatrix::<f64>::zeros(k_count, k_count);
    for x in 0..deaths_len {
        let e = exposures[x];
        if e == 0.0 {
            continue;
        }
        let weight = e * (standard[x] + offsets[x]).exp();
        let row = basis.row(x);
        for (i, bi) in row.iter().enumerate() {
            if *bi == 0.0 {
                continue;
            }
            for (j, bj) in row.iter().enumerate() {
                if *bj != 0.0 {
                    h[(i, j)] += weight * bi * bj;
                }
            }
        }
    }
    // + w DᵀD
    for k in 0..k_count {
        if k > 0 {
            h[(k, k)] += w;
            h[(k, k - 1)] -= w;
        }
        if k + 1 < k_count {
            h[(k, k)] += w;
            h[(k, k + 1)] -= w;
        }
    }
    h
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

const MAX_HALVINGS: usize = 20;

/// Newton ascent on the penalized likelihood, starting from alpha = 0 (the
/// standard itself) with step-halving whenever a full step loses objective.
pub fn topals_fit(
    record: &PopulationRecord,
    standard: &StandardSchedule,
    basis: &SplineBasis,
    options: &TopalsOptions,
) -> Result<TopalsFit> {
    if options.penalty_weight < 0.0 {
        return Err(Error::Validation(format!(
            "penalty weight must be >= 0, got {}",
            options.penalty_weight
        )));
    }
    let deaths = record.deaths();
    let exposures = record.exposures();
    let std_rates = standard.log_rates();
    let w = options.penalty_weight;
    let k_count = basis.n_knots();

    let mut alpha = vec![0.0; k_count];
    check_dims(deaths, exposures, std_rates, basis, &alpha)?;

    let mut objective = topals_log_posterior(&alpha, deaths, exposures, std_rates, basis, w)?;
    let mut grad = topals_gradient(&alpha, deaths, exposures, std_rates, basis, w)?;
    let mut grad_norm = inf_norm(&grad);
    let mut iterations = 0;
    let mut converged = grad_norm <= options.tol;

    while !converged && iterations < options.max_iter {
        let h = neg_hessian(&alpha, deaths.len(), exposures, std_rates, basis, w);
        let chol = Cholesky::new(h).ok_or_else(|| {
            Error::NonIdentifiable(
                "singular Hessian in TOPALS Newton step (degenerate data with zero penalty)".into(),
            )
        })?;
        let step = chol.solve(&DVector::from_column_slice(&grad));

        // near the optimum with large exposures the true improvement falls
        // below the float resolution of the objective; treat changes inside
        // that noise band as non-decreasing
        let slack = 1e-12 * (1.0 + objective.abs());
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> =
                alpha.iter().zip(step.iter()).map(|(a, s)| a + scale * s).collect();
            let cand_obj =
                topals_log_posterior(&candidate, deaths, exposures, std_rates, basis, w)?;
            if cand_obj >= objective - slack {
                alpha = candidate;
                objective = cand_obj.max(objective);
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        iterations += 1;
        if !accepted {
            break; // stalled; report non-convergence below
        }
        grad = topals_gradient(&alpha, deaths, exposures, std_rates, basis, w)?;
        grad_norm = inf_norm(&grad);
        converged = grad_norm <= options.tol;
    }

    let offsets = basis.mul(&alpha);
    let fitted_log_rates: Vec<f64> =
        std_rates.iter().zip(&offsets).map(|(s, o)| s + o).collect();
    Ok(TopalsFit {
        alpha,
        fitted_log_rates,
        iterations,
        converged,
        final_gradient_norm: grad_norm,
        penalty_weight: w,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Sex;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Uniform};

    fn default_basis() -> SplineBasis {
        build_basis(&AgeGrid::complete(), &DEFAULT_KNOTS).unwrap()
    }

    #[test]
    fn basis_rows_at_knots_are_unit_vectors() {
        let b = default_basis();
        assert_eq!(b.row(0), &[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let row70 = b.row(70);
        for (k, v) in row70.iter().enumerate() {
            if k == 5 {
                assert_eq!(*v, 1.0);
            } else {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn basis_interior_row_hand_check() {
        let b = default_basis();
        let row5 = b.row(5);
        assert_eq!(row5[0], 0.0);
        assert_relative_eq!(row5[1], 5.0 / 9.0, max_relative = 1e-15);
        assert_relative_eq!(row5[2], 4.0 / 9.0, max_relative = 1e-15);
        assert!(row5[3..].iter().all(|v| *v == 0.0));
    }

    #[test]
    fn basis_partition_of_unity_and_sparsity() {
        let b = default_basis();
        for x in 0..b.n_ages() {
            let row = b.row(x);
            let sum: f64 = row.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "row {x} sums to {sum}");
            assert!(row.iter().all(|v| (0.0..=1.0).contains(v)));
            assert!(row.iter().filter(|v| **v != 0.0).count() <= 2);
        }
    }

    #[test]
    fn basis_rejects_bad_knots() {
        let grid = AgeGrid::complete();
        assert!(matches!(build_basis(&grid, &[0, 0, 10]), Err(Error::InvalidKnots(_))));
        assert!(matches!(build_basis(&grid, &[5, 50, 100]), Err(Error::InvalidKnots(_))));
        assert!(matches!(build_basis(&grid, &[0, 50, 99]), Err(Error::InvalidKnots(_))));
        assert!(build_basis(&grid, &[0, 50, 100]).is_ok());
    }

    #[test]
    fn log_posterior_all_zero_counts() {
        let b = default_basis();
        let alpha = vec![0.0; 7];
        let deaths = vec![0u64; 100];
        let exposures = vec![1.0; 100];
        let standard = vec![0.0; 100];
        let v = topals_log_posterior(&alpha, &deaths, &exposures, &standard, &b, 1.0).unwrap();
        assert_relative_eq!(v, -100.0, max_relative = 1e-12);
    }

    #[test]
    fn log_posterior_constant_alpha_has_zero_penalty() {
        let b = default_basis();
        let deaths = vec![1u64; 100];
        let exposures = vec![2.0; 100];
        let standard = vec![-3.0; 100];
        let flat = vec![0.7; 7];
        let with_huge_w =
            topals_log_posterior(&flat, &deaths, &exposures, &standard, &b, 1e12).unwrap();
        let with_no_w =
            topals_log_posterior(&flat, &deaths, &exposures, &standard, &b, 0.0).unwrap();
        assert_relative_eq!(with_huge_w, with_no_w, max_relative = 1e-12);
    }

    #[test]
    fn log_posterior_single_age_likelihood_part() {
        // Two-age grid (grid minimum), second age carries no exposure.
        let grid = AgeGrid::new(2).unwrap();
        let b = build_basis(&grid, &[0, 2]).unwrap();
        let alpha = vec![0.0, 0.0];
        let v = topals_log_posterior(&alpha, &[1, 0], &[1.0, 0.0], &[0.0, 0.0], &b, 0.0).unwrap();
        assert_relative_eq!(v, -1.0, max_relative = 1e-12);
    }

    fn fd_gradient(
        alpha: &[f64],
        deaths: &[u64],
        exposures: &[f64],
        standard: &[f64],
        basis: &SplineBasis,
        w: f64,
    ) -> Vec<f64> {
        let h = 1e-5;
        (0..alpha.len())
            .map(|k| {
                let mut up = alpha.to_vec();
                let mut dn = alpha.to_vec();
                up[k] += h;
                dn[k] -= h;
                let f_up =
                    topals_log_posterior(&up, deaths, exposures, standard, basis, w).unwrap();
                let f_dn =
                    topals_log_posterior(&dn, deaths, exposures, standard, basis, w).unwrap();
                (f_up - f_dn) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_central_differences() {
        let b = default_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let unif = Uniform::new(-0.8, 0.8).unwrap();
        let standard: Vec<f64> = (0..100).map(|x| -5.0 + 0.03 * x as f64).collect();
        let exposures: Vec<f64> = (0..100).map(|x| 50.0 + (x % 7) as f64 * 20.0).collect();
        let deaths: Vec<u64> = (0..100).map(|x| (x % 3) as u64).collect();
        for _ in 0..20 {
            let alpha: Vec<f64> = (0..7).map(|_| unif.sample(&mut rng)).collect();
            let g = topals_gradient(&alpha, &deaths, &exposures, &standard, &b, 1.5).unwrap();
            let fd = fd_gradient(&alpha, &deaths, &exposures, &standard, &b, 1.5);
            for (a, n) in g.iter().zip(&fd) {
                let denom = n.abs().max(1.0);
                assert!((a - n).abs() / denom < 1e-6, "analytic {a} vs fd {n}");
            }
        }
    }

    #[test]
    fn fit_recovers_constant_offset() {
        let b = default_basis();
        let standard_vals: Vec<f64> = (0..100).map(|x| -6.0 + 0.04 * x as f64).collect();
        let standard = StandardSchedule::new("test", Sex::Both, standard_vals.clone()).unwrap();
        let e = 1e6;
        let deaths: Vec<u64> = standard_vals
            .iter()
            .map(|s| (e * (s + 0.5).exp()).round() as u64)
            .collect();
        let record =
            PopulationRecord::new("pop", Sex::Both, deaths, vec![e; 100]).unwrap();
        let fit = topals_fit(&record, &standard, &b, &TopalsOptions::default()).unwrap();
        assert!(fit.converged, "gradient norm {}", fit.final_gradient_norm);
        for a in &fit.alpha {
            assert!((a - 0.5).abs() < 0.05, "alpha {a} far from 0.5");
        }
        for (f, s) in fit.fitted_log_rates.iter().zip(&standard_vals) {
            assert_relative_eq!(*f, s + 0.5, epsilon = 0.05);
        }
    }

    #[test]
    fn fit_with_exact_standard_data_has_tiny_offsets() {
        let b = default_basis();
        let standard_vals: Vec<f64> = (0..100).map(|x| -5.0 + 0.02 * x as f64).collect();
        let standard = StandardSchedule::new("test", Sex::Both, standard_vals.clone()).unwrap();
        let e = 1e7;
        let deaths: Vec<u64> =
            standard_vals.iter().map(|s| (e * s.exp()).round() as u64).collect();
        let record = PopulationRecord::new("pop", Sex::Both, deaths, vec![e; 100]).unwrap();
        let fit = topals_fit(&record, &standard, &b, &TopalsOptions::default()).unwrap();
        assert!(fit.converged);
        for a in &fit.alpha {
            assert!(a.abs() < 0.02, "alpha {a} should vanish");
        }
    }

    #[test]
    fn huge_penalty_forces_flat_offsets() {
        let b = default_basis();
        let standard_vals: Vec<f64> = (0..100).map(|x| -5.0 + 0.03 * x as f64).collect();
        let standard = StandardSchedule::new("test", Sex::Both, standard_vals.clone()).unwrap();
        // heterogeneous data: offsets would vary without the penalty
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let unif = Uniform::new(0.5, 1.5).unwrap();
        let deaths: Vec<u64> = standard_vals
            .iter()
            .map(|s| (2000.0 * (s + unif.sample(&mut rng)).exp()).round() as u64)
            .collect();
        let record = PopulationRecord::new("pop", Sex::Both, deaths, vec![2000.0; 100]).unwrap();
        let opts = TopalsOptions { penalty_weight: 1e9, ..TopalsOptions::default() };
        let fit = topals_fit(&record, &standard, &b, &opts).unwrap();
        let (min, max) = fit
            .alpha
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), a| (lo.min(*a), hi.max(*a)));
        assert!(max - min < 1e-3, "alpha spread {} under dominant penalty", max - min);
    }

    #[test]
    fn zero_exposure_age_has_no_influence() {
        let b = default_basis();
        let mut standard_vals: Vec<f64> = (0..100).map(|x| -5.0 + 0.03 * x as f64).collect();
        let mut exposures = vec![500.0; 100];
        exposures[40] = 0.0;
        let deaths: Vec<u64> = standard_vals
            .iter()
            .zip(&exposures)
            .map(|(s, e)| (e * s.exp()).round() as u64)
            .collect();
        let record =
            PopulationRecord::new("pop", Sex::Both, deaths.clone(), exposures.clone()).unwrap();
        let standard = StandardSchedule::new("t", Sex::Both, standard_vals.clone()).unwrap();
        let fit1 = topals_fit(&record, &standard, &b, &TopalsOptions::default()).unwrap();

        // perturbing the standard at the zero-exposure age changes nothing
        standard_vals[40] = 3.0;
        let standard2 = StandardSchedule::new("t", Sex::Both, standard_vals).unwrap();
        let fit2 = topals_fit(&record, &standard2, &b, &TopalsOptions::default()).unwrap();
        assert_eq!(fit1.alpha, fit2.alpha);
    }

    #[test]
    fn monotone_ascent_across_iterates() {
        // replay the fit manually and check the objective trace
        let b = default_basis();
        let standard_vals: Vec<f64> = (0..100).map(|x| -4.0 + 0.05 * x as f64).collect();
        let standard = StandardSchedule::new("t", Sex::Both, standard_vals.clone()).unwrap();
        let deaths: Vec<u64> = (0..100).map(|x| (x % 5) as u64).collect();
        let record = PopulationRecord::new("p", Sex::Both, deaths.clone(), vec![40.0; 100]).unwrap();
        let fit = topals_fit(&record, &standard, &b, &TopalsOptions::default()).unwrap();
        assert!(fit.converged);
        // objective at the solution beats the starting point
        let start = topals_log_posterior(
            &[0.0; 7],
            &deaths,
            record.exposures(),
            &standard_vals,
            &b,
            1.0,
        )
        .unwrap();
        let end = topals_log_posterior(
            &fit.alpha,
            &deaths,
            record.exposures(),
            &standard_vals,
            &b,
            1.0,
        )
        .unwrap();
        assert!(end >= start);
    }

    #[test]
    fn degenerate_data_without_penalty_not_identifiable() {
        let b = default_basis();
        // single informative age cannot identify 7 offsets without penalty
        let mut exposures = vec![0.0; 100];
        exposures[50] = 100.0;
        let mut deaths = vec![0u64; 100];
        deaths[50] = 3;
        let record = PopulationRecord::new("p", Sex::Both, deaths, exposures).unwrap();
        let standard = StandardSchedule::new("t", Sex::Both, vec![-4.0; 100]).unwrap();
        let opts = TopalsOptions { penalty_weight: 0.0, ..TopalsOptions::default() };
        let err = topals_fit(&record, &standard, &b, &opts).unwrap_err();
        assert!(matches!(err, Error::NonIdentifiable(_)));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn partition_of_unity_for_covering_knots(
            mid in proptest::collection::vec(1u32..99, 1..5),
        ) {
            let mut knots: Vec<u32> = vec![0];
            let mut mid = mid.clone();
            mid.sort_unstable();
            mid.dedup();
            knots.extend(mid);
            knots.push(100);
            let b = build_basis(&AgeGrid::complete(), &knots).unwrap();
            for x in 0..b.n_ages() {
                let sum: f64 = b.row(x).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn objective_midpoint_concavity(seed in 0u64..500) {
            let b = default_basis();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let unif = Uniform::new(-1.0, 1.0).unwrap();
            let standard: Vec<f64> = (0..100).map(|x| -5.0 + 0.03 * x as f64).collect();
            let deaths: Vec<u64> = (0..100).map(|x| (x % 4) as u64).collect();
            let exposures = vec![30.0; 100];
            let a1: Vec<f64> = (0..7).map(|_| unif.sample(&mut rng)).collect();
            let a2: Vec<f64> = (0..7).map(|_| unif.sample(&mut rng)).collect();
            let mid: Vec<f64> = a1.iter().zip(&a2).map(|(x, y)| 0.5 * (x + y)).collect();
            let f1 = topals_log_posterior(&a1, &deaths, &exposures, &standard, &b, 0.8).unwrap();
            let f2 = topals_log_posterior(&a2, &deaths, &exposures, &standard, &b, 0.8).unwrap();
            let fm = topals_log_posterior(&mid, &deaths, &exposures, &standard, &b, 0.8).unwrap();
            prop_assert!(fm >= f1.min(f2) - 1e-9);
        }
    }
}
