//! Joint hierarchical dynamic Poisson model over n populations.
//!
//! Death counts are Poisson with mean E * theta, where log theta_{i,x} is
//! beta_{i,x} + mu_i * S_x. The beta chain follows a Gaussian random walk
//! across ages (precision tau_beta) started from a hyper-node beta0_i;
//! loadings mu_i are exchangeable N(0, tau_mu). Both precisions carry
//! Gamma(a, b) hyperpriors and are shared by all populations, which is what
//! lets sparse schedules borrow smoothness from the whole dataset.
//!
//! Sampling is Metropolis-within-Gibbs: single-site random-walk Metropolis on
//! each beta_{i,x} and mu_i, conjugate Gibbs draws for beta0_i and the two
//! precisions. Every population owns an RNG substream keyed by its identity,
//! so results do not depend on population order and per-population updates
//! could run in parallel without changing a single draw.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;

use crate::data::{FitResult, ModelKind, MortalityDataset, StandardSchedule};
use crate::error::{Error, Result};
use crate::math::{derive_seed, fnv1a64, gamma_logpdf, normal_logpdf_prec, quantile_sorted};

/// Sampler configuration. The defaults mirror the long-run setup (two chains,
/// burn-in 100,000, lag 5,000, 2,000 kept draws per chain); tests and desk
/// runs override them downward.
#[derive(Debug, Clone)]
pub struct DynPoissonConfig {
    pub chains: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub keep: usize,
    pub seed: u64,
    pub proposal_scale_beta: f64,
    pub proposal_scale_mu: f64,
    /// Adapt proposal scales toward 0.44 acceptance during burn-in only.
    pub adapt: bool,
    /// Gamma hyperprior shape on both precisions.
    pub prior_a: f64,
    /// Gamma hyperprior rate on both precisions.
    pub prior_b: f64,
    /// Precision of the N(0, tau) prior on the initial node beta0_i.
    pub init_precision: f64,
}

impl Default for DynPoissonConfig {
    fn default() -> Self {
        Self {
            chains: 2,
            burn_in: 100_000,
            thin: 5_000,
            keep: 2_000,
            seed: 1,
            proposal_scale_beta: 0.1,
            proposal_scale_mu: 0.05,
            adapt: true,
            prior_a: 0.01,
            prior_b: 0.01,
            init_precision: 100.0,
        }
    }
}

impl DynPoissonConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains == 0 || self.thin == 0 || self.keep == 0 {
            return Err(Error::Validation(
                "chains, thin and keep must all be positive".into(),
            ));
        }
        for (name, v) in [
            ("proposal_scale_beta", self.proposal_scale_beta),
            ("proposal_scale_mu", self.proposal_scale_mu),
            ("prior_a", self.prior_a),
            ("prior_b", self.prior_b),
            ("init_precision", self.init_precision),
        ] {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::Validation(format!("{name} must be finite and > 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// One point of the latent space.
#[derive(Debug, Clone, PartialEq)]
pub struct DynPoissonState {
    /// Random-walk intercepts, one row per population, one column per age.
    pub beta: Vec<Vec<f64>>,
    /// Initial-condition node per population.
    pub beta0: Vec<f64>,
    /// Standard-schedule loading per population.
    pub mu: Vec<f64>,
    pub tau_beta: f64,
    pub tau_mu: f64,
}

impl DynPoissonState {
    /// Deterministic starting point: at the standard schedule (beta = 0,
    /// mu = 1) with unit precisions.
    pub fn initial(n_populations: usize, n_ages: usize) -> Self {
        Self {
            beta: vec![vec![0.0; n_ages]; n_populations],
            beta0: vec![0.0; n_populations],
            mu: vec![1.0; n_populations],
            tau_beta: 1.0,
            tau_mu: 1.0,
        }
    }

    pub fn n_populations(&self) -> usize {
        self.beta.len()
    }

    pub fn n_ages(&self) -> usize {
        self.beta.first().map_or(0, |row| row.len())
    }

    pub fn validate(&self) -> Result<()> {
        if !self.tau_beta.is_finite()
            || self.tau_beta <= 0.0
            || !self.tau_mu.is_finite()
            || self.tau_mu <= 0.0
        {
            return Err(Error::Validation("precisions must be positive".into()));
        }
        let n_ages = self.n_ages();
        for row in &self.beta {
            if row.len() != n_ages || row.iter().any(|b| !b.is_finite()) {
                return Err(Error::Validation("beta rows must be finite and rectangular".into()));
            }
        }
        if self.beta0.len() != self.beta.len() || self.mu.len() != self.beta.len() {
            return Err(Error::Validation("beta0/mu length mismatch".into()));
        }
        Ok(())
    }
}

/// Per-chain Metropolis acceptance rates over post-burn-in sweeps.
#[derive(Debug, Clone, Copy)]
pub struct ChainAcceptance {
    pub beta: f64,
    pub mu: f64,
}

/// Posterior draws indexed by (chain, kept iteration).
#[derive(Debug, Clone)]
pub struct PosteriorSamples {
    pub draws: Vec<Vec<DynPoissonState>>,
    pub acceptance_rates: Vec<ChainAcceptance>,
    pub config: DynPoissonConfig,
}

impl PosteriorSamples {
    pub fn n_draws(&self) -> usize {
        self.draws.iter().map(|c| c.len()).sum()
    }

    /// All kept states, chain-major.
    pub fn iter_draws(&self) -> impl Iterator<Item = &DynPoissonState> {
        self.draws.iter().flatten()
    }
}

fn standard_for(standards: &[StandardSchedule], i: usize) -> &StandardSchedule {
    if standards.len() == 1 {
        &standards[0]
    } else {
        &standards[i]
    }
}

fn validate_standards(
    standards: &[StandardSchedule],
    n_populations: usize,
    n_ages: usize,
) -> Result<()> {
    if standards.len() != 1 && standards.len() != n_populations {
        return Err(Error::Validation(format!(
            "need 1 shared standard or {n_populations} per-population standards, got {}",
            standards.len()
        )));
    }
    for s in standards {
        if s.n_ages() != n_ages {
            return Err(Error::Validation(format!(
                "standard {} has {} ages, dataset has {n_ages}",
                s.label,
                s.n_ages()
            )));
        }
    }
    Ok(())
}

/// Poisson log-likelihood of the whole dataset at a state, omitting log Y!
/// terms. Ages with zero exposure contribute nothing.
pub fn log_likelihood(
    state: &DynPoissonState,
    dataset: &MortalityDataset,
    standards: &[StandardSchedule],
) -> Result<f64> {
    let n_ages = dataset.age_grid().len();
    validate_standards(standards, dataset.n_populations(), n_ages)?;
    if state.n_populations() != dataset.n_populations() || state.n_ages() != n_ages {
        return Err(Error::Validation("state does not match dataset shape".into()));
    }
    let mut total = 0.0;
    for (i, record) in dataset.populations().iter().enumerate() {
        let s = standard_for(standards, i).log_rates();
        let mu = state.mu[i];
        for (((&e, &y), &s_x), &beta) in record
            .exposures()
            .iter()
            .zip(record.deaths())
            .zip(s)
            .zip(&state.beta[i])
        {
            if e == 0.0 {
                continue;
            }
            let eta = beta + mu * s_x;
            total += y as f64 * (e.ln() + eta) - e * eta.exp();
        }
    }
    Ok(total)
}

/// Joint log-prior of a state: random-walk increments, loadings, precision
/// hyperpriors and the initial-node prior.
pub fn log_prior(state: &DynPoissonState, prior_a: f64, prior_b: f64, init_precision: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..state.n_populations() {
        total += normal_logpdf_prec(state.beta0[i], 0.0, init_precision);
        total += normal_logpdf_prec(state.beta[i][0], state.beta0[i], state.tau_beta);
        for x in 1..state.n_ages() {
            total += normal_logpdf_prec(state.beta[i][x], state.beta[i][x - 1], state.tau_beta);
        }
        total += normal_logpdf_prec(state.mu[i], 0.0, state.tau_mu);
    }
    total += gamma_logpdf(state.tau_beta, prior_a, prior_b);
    total += gamma_logpdf(state.tau_mu, prior_a, prior_b);
    total
}

/// Proposal scales, one per Metropolis site.
#[derive(Debug, Clone)]
pub struct MhScales {
    pub beta: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
}

impl MhScales {
    pub fn uniform(n_populations: usize, n_ages: usize, beta: f64, mu: f64) -> Self {
        Self { beta: vec![vec![beta; n_ages]; n_populations], mu: vec![mu; n_populations] }
    }
}

/// Accept counters, one per Metropolis site.
#[derive(Debug, Clone)]
pub struct AcceptCounts {
    pub beta: Vec<Vec<u64>>,
    pub mu: Vec<u64>,
}

impl AcceptCounts {
    pub fn zeros(n_populations: usize, n_ages: usize) -> Self {
        Self { beta: vec![vec![0; n_ages]; n_populations], mu: vec![0; n_populations] }
    }

    pub fn reset(&mut self) {
        self.beta.iter_mut().for_each(|row| row.fill(0));
        self.mu.fill(0);
    }
}

fn likelihood_delta(deaths: u64, exposure: f64, eta_new: f64, eta_old: f64) -> f64 {
    if exposure == 0.0 {
        return 0.0;
    }
    deaths as f64 * (eta_new - eta_old) - exposure * (eta_new.exp() - eta_old.exp())
}

/// One single-site random-walk Metropolis sweep over every beta_{i,x}.
///
/// `rngs` holds one generator per population (same order as the dataset);
/// acceptance counts accumulate into `accepts`.
pub fn update_beta(
    state: &mut DynPoissonState,
    dataset: &MortalityDataset,
    standards: &[StandardSchedule],
    rngs: &mut [ChaCha8Rng],
    scales: &MhScales,
    accepts: &mut AcceptCounts,
) {
    let n_ages = state.n_ages();
    let tau = state.tau_beta;
    for (i, record) in dataset.populations().iter().enumerate() {
        let s = standard_for(standards, i).log_rates();
        let rng = &mut rngs[i];
        let mu_i = state.mu[i];
        for (x, &s_x) in s.iter().enumerate() {
            let current = state.beta[i][x];
            let step: f64 = StandardNormal.sample(rng);
            let proposal = current + scales.beta[i][x] * step;

            let mu_s = mu_i * s_x;
            let mut delta = likelihood_delta(
                record.deaths()[x],
                record.exposures()[x],
                proposal + mu_s,
                current + mu_s,
            );

            // random-walk prior terms touching this site
            let left = if x == 0 { state.beta0[i] } else { state.beta[i][x - 1] };
            delta -= 0.5 * tau * ((proposal - left).powi(2) - (current - left).powi(2));
            if x + 1 < n_ages {
                let right = state.beta[i][x + 1];
                delta -= 0.5 * tau * ((right - proposal).powi(2) - (right - current).powi(2));
            }

            let u: f64 = rng.random();
            if u.ln() < delta {
                state.beta[i][x] = proposal;
                accepts.beta[i][x] += 1;
            }
        }
    }
}

/// Random-walk Metropolis update of each loading mu_i against its Poisson
/// likelihood and N(0, tau_mu) prior.
pub fn update_mu(
    state: &mut DynPoissonState,
    dataset: &MortalityDataset,
    standards: &[StandardSchedule],
    rngs: &mut [ChaCha8Rng],
    scales: &MhScales,
    accepts: &mut AcceptCounts,
) {
    let tau = state.tau_mu;
    for (i, record) in dataset.populations().iter().enumerate() {
        let s = standard_for(standards, i).log_rates();
        let rng = &mut rngs[i];
        let current = state.mu[i];
        let step: f64 = StandardNormal.sample(rng);
        let proposal = current + scales.mu[i] * step;

        let mut delta = 0.0;
        for (((&y, &e), &s_x), &beta) in
            record.deaths().iter().zip(record.exposures()).zip(s).zip(&state.beta[i])
        {
            delta += likelihood_delta(y, e, beta + proposal * s_x, beta + current * s_x);
        }
        delta -= 0.5 * tau * (proposal * proposal - current * current);

        let u: f64 = rng.random();
        if u.ln() < delta {
            state.mu[i] = proposal;
            accepts.mu[i] += 1;
        }
    }
}

/// Conjugate Gaussian Gibbs draw of each initial node:
/// beta0_i | . ~ N(tau_beta * beta_{i,0} / (p0 + tau_beta), precision p0 + tau_beta).
pub fn update_beta0(state: &mut DynPoissonState, init_precision: f64, rngs: &mut [ChaCha8Rng]) {
    let tau = state.tau_beta;
    let precision = init_precision + tau;
    let sd = (1.0 / precision).sqrt();
    for ((rng, row), node) in rngs.iter_mut().zip(&state.beta).zip(&mut state.beta0) {
        let mean = tau * row[0] / precision;
        let z: f64 = StandardNormal.sample(rng);
        *node = mean + sd * z;
    }
}

/// Shape/rate pairs of the two precision full conditionals at a state.
///
/// The rate sums are accumulated in value order so they do not depend on how
/// populations are arranged in the dataset.
pub fn precision_conditionals(
    state: &DynPoissonState,
    prior_a: f64,
    prior_b: f64,
) -> ((f64, f64), (f64, f64)) {
    let n = state.n_populations() as f64;
    let n_ages = state.n_ages() as f64;

    let mut beta_partials: Vec<f64> = state
        .beta
        .iter()
        .zip(&state.beta0)
        .map(|(row, node)| {
            (row[0] - node).powi(2)
                + row.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum::<f64>()
        })
        .collect();
    beta_partials.sort_by(|a, b| a.partial_cmp(b).expect("finite sums"));
    let beta_ss: f64 = beta_partials.iter().sum();

    let mut mu_partials: Vec<f64> = state.mu.iter().map(|m| m * m).collect();
    mu_partials.sort_by(|a, b| a.partial_cmp(b).expect("finite sums"));
    let mu_ss: f64 = mu_partials.iter().sum();

    let beta_shape = prior_a + n * n_ages / 2.0;
    let beta_rate = prior_b + 0.5 * beta_ss;
    let mu_shape = prior_a + n / 2.0;
    let mu_rate = prior_b + 0.5 * mu_ss;
    ((beta_shape, beta_rate), (mu_shape, mu_rate))
}

/// Conjugate Gibbs draws of tau_beta and tau_mu from their Gamma full
/// conditionals.
pub fn update_precisions(
    state: &mut DynPoissonState,
    prior_a: f64,
    prior_b: f64,
    rng: &mut ChaCha8Rng,
) {
    let ((beta_shape, beta_rate), (mu_shape, mu_rate)) =
        precision_conditionals(state, prior_a, prior_b);
    let gamma_beta = Gamma::new(beta_shape, 1.0 / beta_rate).expect("valid Gamma parameters");
    state.tau_beta = gamma_beta.sample(rng);
    let gamma_mu = Gamma::new(mu_shape, 1.0 / mu_rate).expect("valid Gamma parameters");
    state.tau_mu = gamma_mu.sample(rng);
}

/// Per-population and precision RNG substreams for one chain. Population
/// streams are keyed by (id, sex), not position, so permuting the dataset
/// permutes the draws without changing them.
pub fn chain_rngs(dataset: &MortalityDataset, chain_seed: u64) -> (Vec<ChaCha8Rng>, ChaCha8Rng) {
    let population_rngs = dataset
        .populations()
        .iter()
        .map(|r| {
            let key = fnv1a64(&format!("{}|{}", r.id, r.sex));
            ChaCha8Rng::seed_from_u64(derive_seed(chain_seed, key))
        })
        .collect();
    let tau_rng = ChaCha8Rng::seed_from_u64(derive_seed(chain_seed, 0x7461_755f_7267_6e67));
    (population_rngs, tau_rng)
}

const ADAPT_BATCH: usize = 50;
const ACCEPT_TARGET: f64 = 0.44;

fn adapt_scales(scales: &mut MhScales, batch_accepts: &AcceptCounts, batch_number: usize) {
    let delta = (1.0 / (batch_number as f64).sqrt()).min(0.1);
    let factor_up = delta.exp();
    let factor_dn = (-delta).exp();
    for (row, acc_row) in scales.beta.iter_mut().zip(&batch_accepts.beta) {
        for (scale, acc) in row.iter_mut().zip(acc_row) {
            let rate = *acc as f64 / ADAPT_BATCH as f64;
            *scale *= if rate > ACCEPT_TARGET { factor_up } else { factor_dn };
        }
    }
    for (scale, acc) in scales.mu.iter_mut().zip(&batch_accepts.mu) {
        let rate = *acc as f64 / ADAPT_BATCH as f64;
        *scale *= if rate > ACCEPT_TARGET { factor_up } else { factor_dn };
    }
}

fn run_chain(
    dataset: &MortalityDataset,
    standards: &[StandardSchedule],
    config: &DynPoissonConfig,
    chain_index: usize,
) -> (Vec<DynPoissonState>, ChainAcceptance) {
    let n = dataset.n_populations();
    let n_ages = dataset.age_grid().len();
    let chain_seed = derive_seed(config.seed, chain_index as u64);
    let (mut pop_rngs, mut tau_rng) = chain_rngs(dataset, chain_seed);

    let mut state = DynPoissonState::initial(n, n_ages);
    let mut scales =
        MhScales::uniform(n, n_ages, config.proposal_scale_beta, config.proposal_scale_mu);
    let mut batch_accepts = AcceptCounts::zeros(n, n_ages);
    let mut report_accepts = AcceptCounts::zeros(n, n_ages);

    let total_sweeps = config.burn_in + config.keep * config.thin;
    let mut kept = Vec::with_capacity(config.keep);
    let mut batch_number = 0usize;

    for sweep in 1..=total_sweeps {
        let in_burn_in = sweep <= config.burn_in;
        let counts = if in_burn_in { &mut batch_accepts } else { &mut report_accepts };
        update_beta(&mut state, dataset, standards, &mut pop_rngs, &scales, counts);
        update_mu(&mut state, dataset, standards, &mut pop_rngs, &scales, counts);
        update_beta0(&mut state, config.init_precision, &mut pop_rngs);
        update_precisions(&mut state, config.prior_a, config.prior_b, &mut tau_rng);

        if in_burn_in && config.adapt && sweep.is_multiple_of(ADAPT_BATCH) {
            batch_number += 1;
            adapt_scales(&mut scales, &batch_accepts, batch_number);
            batch_accepts.reset();
        }
        if !in_burn_in && (sweep - config.burn_in).is_multiple_of(config.thin) {
            kept.push(state.clone());
        }
    }

    let post_sweeps = (config.keep * config.thin) as f64;
    let beta_total: u64 = report_accepts.beta.iter().flatten().sum();
    let mu_total: u64 = report_accepts.mu.iter().sum();
    let acceptance = ChainAcceptance {
        beta: beta_total as f64 / (post_sweeps * (n * n_ages) as f64),
        mu: mu_total as f64 / (post_sweeps * n as f64),
    };
    (kept, acceptance)
}

/// Runs the full sampler: per iteration update_beta, update_mu, update_beta0,
/// update_precisions; burn-in discarded, thinning applied. Chains run in
/// parallel on deterministic seed substreams, so the same config always
/// produces bit-identical draws.
pub fn run_mcmc(
    dataset: &MortalityDataset,
    standards: &[StandardSchedule],
    config: &DynPoissonConfig,
) -> Result<PosteriorSamples> {
    config.validate()?;
    validate_standards(standards, dataset.n_populations(), dataset.age_grid().len())?;

    let results: Vec<(Vec<DynPoissonState>, ChainAcceptance)> = (0..config.chains)
        .into_par_iter()
        .map(|c| run_chain(dataset, standards, config, c))
        .collect();

    let mut draws = Vec::with_capacity(config.chains);
    let mut acceptance_rates = Vec::with_capacity(config.chains);
    for (kept, acc) in results {
        draws.push(kept);
        acceptance_rates.push(acc);
    }
    Ok(PosteriorSamples { draws, acceptance_rates, config: config.clone() })
}

/// Pointwise posterior mean and quantiles of log theta_{i,x} = beta_{i,x} +
/// mu_i S_x for every population. `probs` is the (lower, upper) quantile pair.
pub fn posterior_summary(
    samples: &PosteriorSamples,
    dataset: &MortalityDataset,
    standards: &[StandardSchedule],
    probs: &[f64],
) -> Result<Vec<FitResult>> {
    if samples.n_draws() == 0 {
        return Err(Error::Validation("no posterior draws".into()));
    }
    if probs.len() != 2 || probs[0] >= probs[1] {
        return Err(Error::Validation(format!(
            "probs must be an increasing (lower, upper) pair, got {probs:?}"
        )));
    }
    let n_ages = dataset.age_grid().len();
    validate_standards(standards, dataset.n_populations(), n_ages)?;

    let n_draws = samples.n_draws();
    let mut fits = Vec::with_capacity(dataset.n_populations());
    for (i, record) in dataset.populations().iter().enumerate() {
        let s = standard_for(standards, i).log_rates();
        let mut means = Vec::with_capacity(n_ages);
        let mut lower = Vec::with_capacity(n_ages);
        let mut upper = Vec::with_capacity(n_ages);
        let mut values = vec![0.0; n_draws];
        for (x, &s_x) in s.iter().enumerate() {
            for (slot, draw) in values.iter_mut().zip(samples.iter_draws()) {
                *slot = draw.beta[i][x] + draw.mu[i] * s_x;
            }
            let mean = values.iter().sum::<f64>() / n_draws as f64;
            values.sort_by(|a, b| a.partial_cmp(b).expect("finite draws"));
            means.push(mean);
            lower.push(quantile_sorted(&values, probs[0]));
            upper.push(quantile_sorted(&values, probs[1]));
        }
        fits.push(FitResult::with_interval(
            record.id.clone(),
            record.sex,
            ModelKind::DynPoisson,
            means,
            lower,
            upper,
        ));
    }
    Ok(fits)
}
