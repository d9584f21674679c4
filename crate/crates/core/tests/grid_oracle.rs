//! Checks the Metropolis-within-Gibbs updates against a deterministic
//! grid-integration oracle on a one-population, two-age instance with the
//! precisions held fixed.

use mortsched_core::data::{AgeGrid, MortalityDataset, PopulationRecord, Sex, StandardSchedule};
use mortsched_core::dynpoisson::{
    update_beta, update_beta0, update_mu, AcceptCounts, DynPoissonState, MhScales,
};
use mortsched_core::math::normal_logpdf_prec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const EXPOSURES: [f64; 2] = [3.0, 2.0];
const DEATHS: [u64; 2] = [2, 1];
const STANDARD: [f64; 2] = [-1.0, -0.5];
const TAU_BETA: f64 = 1.0;
const TAU_MU: f64 = 1.0;
const INIT_PRECISION: f64 = 100.0;

// Unnormalized log posterior over (beta0_node, beta_0, beta_1, mu).
fn log_target(b0node: f64, b0: f64, b1: f64, mu: f64) -> f64 {
    let mut f = 0.0;
    for (x, (&e, &y)) in EXPOSURES.iter().zip(&DEATHS).enumerate() {
        let beta = if x == 0 { b0 } else { b1 };
        let eta = beta + mu * STANDARD[x];
        f += y as f64 * (e.ln() + eta) - e * eta.exp();
    }
    f += normal_logpdf_prec(b0node, 0.0, INIT_PRECISION);
    f += normal_logpdf_prec(b0, b0node, TAU_BETA);
    f += normal_logpdf_prec(b1, b0, TAU_BETA);
    f += normal_logpdf_prec(mu, 0.0, TAU_MU);
    f
}

struct Grid {
    lo: f64,
    hi: f64,
    n: usize,
}

impl Grid {
    fn point(&self, i: usize) -> f64 {
        // midpoint rule
        let h = (self.hi - self.lo) / self.n as f64;
        self.lo + (i as f64 + 0.5) * h
    }
}

/// Posterior means of all four coordinates by brute-force quadrature.
fn grid_means() -> [f64; 4] {
    let g_node = Grid { lo: -1.0, hi: 1.0, n: 29 };
    let g_b0 = Grid { lo: -8.0, hi: 7.0, n: 121 };
    let g_b1 = Grid { lo: -8.0, hi: 7.0, n: 121 };
    let g_mu = Grid { lo: -5.5, hi: 5.5, n: 81 };

    // stabilize exponentials around the maximum
    let mut max_f = f64::NEG_INFINITY;
    for i in 0..g_node.n {
        for j in 0..g_b0.n {
            for k in 0..g_b1.n {
                for l in 0..g_mu.n {
                    let f =
                        log_target(g_node.point(i), g_b0.point(j), g_b1.point(k), g_mu.point(l));
                    if f > max_f {
                        max_f = f;
                    }
                }
            }
        }
    }

    let mut mass = 0.0;
    let mut first_moments = [0.0; 4];
    let mut boundary_max = f64::NEG_INFINITY;
    for i in 0..g_node.n {
        for j in 0..g_b0.n {
            for k in 0..g_b1.n {
                for l in 0..g_mu.n {
                    let z = [g_node.point(i), g_b0.point(j), g_b1.point(k), g_mu.point(l)];
                    let f = log_target(z[0], z[1], z[2], z[3]);
                    let w = (f - max_f).exp();
                    mass += w;
                    for (m, zi) in first_moments.iter_mut().zip(&z) {
                        *m += w * zi;
                    }
                    let on_edge = i == 0
                        || i + 1 == g_node.n
                        || j == 0
                        || j + 1 == g_b0.n
                        || k == 0
                        || k + 1 == g_b1.n
                        || l == 0
                        || l + 1 == g_mu.n;
                    if on_edge && f > boundary_max {
                        boundary_max = f;
                    }
                }
            }
        }
    }
    assert!(
        boundary_max - max_f < -16.0,
        "posterior mass leaks past the grid boundary: {}",
        boundary_max - max_f
    );
    first_moments.map(|m| m / mass)
}

fn mcmc_means(sweeps: usize, seed: u64) -> [f64; 4] {
    let record =
        PopulationRecord::new("toy", Sex::Both, DEATHS.to_vec(), EXPOSURES.to_vec()).unwrap();
    let dataset = MortalityDataset::new(vec![record], AgeGrid::new(2).unwrap()).unwrap();
    let standard = StandardSchedule::new("s", Sex::Both, STANDARD.to_vec()).unwrap();
    let standards = [standard];

    let mut state = DynPoissonState::initial(1, 2);
    state.tau_beta = TAU_BETA;
    state.tau_mu = TAU_MU;
    let mut rngs = vec![ChaCha8Rng::seed_from_u64(seed)];
    let scales = MhScales::uniform(1, 2, 0.8, 0.8);
    let mut accepts = AcceptCounts::zeros(1, 2);

    let burn_in = 10_000;
    let mut sums = [0.0; 4];
    for sweep in 0..(burn_in + sweeps) {
        update_beta(&mut state, &dataset, &standards, &mut rngs, &scales, &mut accepts);
        update_mu(&mut state, &dataset, &standards, &mut rngs, &scales, &mut accepts);
        update_beta0(&mut state, INIT_PRECISION, &mut rngs);
        // precisions stay fixed for the oracle comparison
        if sweep >= burn_in {
            sums[0] += state.beta0[0];
            sums[1] += state.beta[0][0];
            sums[2] += state.beta[0][1];
            sums[3] += state.mu[0];
        }
    }
    sums.map(|s| s / sweeps as f64)
}

#[test]
fn mcmc_matches_grid_integration() {
    let oracle = grid_means();
    let mcmc = mcmc_means(100_000, 424_242);
    let names = ["beta0_node", "beta_0", "beta_1", "mu"];
    for ((o, m), name) in oracle.iter().zip(&mcmc).zip(&names) {
        assert!(
            (o - m).abs() < 0.02,
            "{name}: oracle {o:.4} vs mcmc {m:.4}"
        );
    }
}
