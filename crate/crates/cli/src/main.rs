//! mortsched: smoothed mortality schedules for small populations.
//!
//! Exit codes: 0 success, 1 runtime or model error, 2 usage error.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use mortsched_cli::error::CliError;
use mortsched_cli::{chart, io};
use mortsched_core::data::{
    naive_rates, FitResult, ModelKind, MortalityDataset, Sex, StandardSchedule,
};
use mortsched_core::diagnostics::split_rhat;
use mortsched_core::dlm::{fit_dlm, DlmOptions};
use mortsched_core::dynpoisson::{posterior_summary, run_mcmc, DynPoissonConfig};
use mortsched_core::math::derive_seed;
use mortsched_core::simulation::{
    default_sizes, run_benchmark, simulate_population, BenchmarkOptions,
};
use mortsched_core::topals::{build_basis, topals_fit, TopalsOptions, DEFAULT_KNOTS};

#[derive(Parser)]
#[command(
    name = "mortsched",
    version,
    about = "Estimate smoothed complete mortality schedules for small populations"
)]
struct Cli {
    /// Base RNG seed used wherever randomness is involved.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Flat key=value run file supplying defaults; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Schema-check input files without fitting anything.
    Validate(ValidateArgs),
    /// Fit one model to every population in a dataset.
    Fit(FitArgs),
    /// Emit a synthetic dataset drawn from a reference schedule.
    Simulate(SimulateArgs),
    /// Run the full simulation benchmark and write a metrics table.
    Benchmark(BenchmarkArgs),
    /// Render observed rates, fitted curves and the standard as SVG.
    Chart(ChartArgs),
}

#[derive(Args)]
struct ValidateArgs {
    /// Mortality dataset (area_id,sex,age,deaths,exposure).
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Standard schedule (age,sex,log_rate).
    #[arg(long)]
    standard: Option<PathBuf>,
    /// Simulation reference (age,share,rate).
    #[arg(long)]
    reference: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Model to fit: dyn-poisson, topals or gaussian-dlm.
    #[arg(long)]
    model: Option<String>,
    /// Mortality dataset to fit.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Standard schedule file.
    #[arg(long)]
    standard: Option<PathBuf>,
    /// Restrict to one sex: female, male, both or all.
    #[arg(long)]
    sex: Option<String>,
    /// Output path of the fitted-schedule table.
    #[arg(long)]
    output: Option<PathBuf>,

    /// MCMC chains (dyn-poisson).
    #[arg(long)]
    chains: Option<usize>,
    /// Burn-in sweeps per chain (dyn-poisson).
    #[arg(long)]
    burn_in: Option<usize>,
    /// Thinning lag between kept draws (dyn-poisson).
    #[arg(long)]
    thin: Option<usize>,
    /// Kept draws per chain after thinning (dyn-poisson).
    #[arg(long)]
    keep: Option<usize>,
    /// Initial random-walk proposal scale for beta sites (dyn-poisson).
    #[arg(long)]
    scale_beta: Option<f64>,
    /// Initial random-walk proposal scale for mu sites (dyn-poisson).
    #[arg(long)]
    scale_mu: Option<f64>,
    /// Disable proposal-scale adaptation during burn-in (dyn-poisson).
    #[arg(long)]
    no_adapt: bool,
    /// Gamma hyperprior shape on the precisions (dyn-poisson).
    #[arg(long)]
    prior_a: Option<f64>,
    /// Gamma hyperprior rate on the precisions (dyn-poisson).
    #[arg(long)]
    prior_b: Option<f64>,
    /// Precision of the initial-node prior (dyn-poisson).
    #[arg(long)]
    init_precision: Option<f64>,

    /// Smoothness penalty weight (topals).
    #[arg(long)]
    penalty_weight: Option<f64>,
    /// Newton iteration cap (topals).
    #[arg(long)]
    max_iter: Option<usize>,
    /// Gradient sup-norm tolerance (topals).
    #[arg(long)]
    tol: Option<f64>,
    /// Comma-separated spline knot ages (topals).
    #[arg(long)]
    knots: Option<String>,

    /// Include the standard as a regression term (gaussian-dlm).
    #[arg(long)]
    dlm_regression: bool,
}

#[derive(Args)]
struct SimulateArgs {
    /// Simulation reference schedule.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Comma-separated population totals; default is the benchmark ladder.
    #[arg(long)]
    sizes: Option<String>,
    /// Output path of the synthetic dataset.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Simulation reference schedule.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Standard schedule file.
    #[arg(long)]
    standard: Option<PathBuf>,
    /// Comma-separated population totals; default is the benchmark ladder.
    #[arg(long)]
    sizes: Option<String>,
    /// Comma-separated models (dyn-poisson,topals,gaussian-dlm,truth).
    #[arg(long)]
    models: Option<String>,
    /// Output path of the metrics table.
    #[arg(long)]
    output: Option<PathBuf>,

    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    #[arg(long)]
    keep: Option<usize>,
    #[arg(long)]
    penalty_weight: Option<f64>,
    #[arg(long)]
    dlm_regression: bool,
}

#[derive(Args)]
struct ChartArgs {
    /// Mortality dataset holding the observed rates.
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Population identifier (area_id) to draw.
    #[arg(long)]
    area: Option<String>,
    /// Sex stratum of the population (default both).
    #[arg(long)]
    sex: Option<String>,
    /// Standard schedule file.
    #[arg(long)]
    standard: Option<PathBuf>,
    /// Fitted-schedule tables to overlay; repeatable.
    #[arg(long = "fits")]
    fits: Vec<PathBuf>,
    /// Output path of the SVG chart.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err @ CliError::Usage(_)) => {
            eprintln!("error: {err}");
            ExitCode::from(2)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(1)
        }
    }
}

/// Config-file values fill in flags the command line left unset.
struct Resolver {
    config: HashMap<String, String>,
    seed: u64,
}

impl Resolver {
    fn new(cli_seed: Option<u64>, config_path: Option<&Path>) -> Result<Self, CliError> {
        let config = match config_path {
            Some(p) => io::read_config(p)?,
            None => HashMap::new(),
        };
        let mut resolver = Resolver { config, seed: 1 };
        resolver.seed = resolver.get("seed", cli_seed)?.unwrap_or(1);
        Ok(resolver)
    }

    fn get<T: FromStr>(&self, key: &str, cli: Option<T>) -> Result<Option<T>, CliError> {
        if cli.is_some() {
            return Ok(cli);
        }
        match self.config.get(key) {
            Some(raw) => raw.parse::<T>().map(Some).map_err(|_| {
                CliError::Usage(format!("config key `{key}`: cannot parse `{raw}`"))
            }),
            None => Ok(None),
        }
    }

    fn get_or<T: FromStr>(&self, key: &str, cli: Option<T>, default: T) -> Result<T, CliError> {
        Ok(self.get(key, cli)?.unwrap_or(default))
    }

    fn require<T: FromStr>(&self, key: &str, cli: Option<T>) -> Result<T, CliError> {
        self.get(key, cli)?
            .ok_or_else(|| CliError::Usage(format!("missing required flag --{key}")))
    }

    fn flag(&self, key: &str, cli: bool) -> Result<bool, CliError> {
        if cli {
            return Ok(true);
        }
        Ok(self.get::<bool>(key, None)?.unwrap_or(false))
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        if threads == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // ignore AlreadyInitialized: only the first initialization matters
        let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
    }
    let resolver = Resolver::new(cli.seed, cli.config.as_deref())?;
    match cli.command {
        Command::Validate(args) => cmd_validate(args, &resolver),
        Command::Fit(args) => cmd_fit(args, &resolver),
        Command::Simulate(args) => cmd_simulate(args, &resolver),
        Command::Benchmark(args) => cmd_benchmark(args, &resolver),
        Command::Chart(args) => cmd_chart(args, &resolver),
    }
}

fn parse_sex_filter(raw: &str) -> Result<Option<Sex>, CliError> {
    if raw == "all" {
        return Ok(None);
    }
    Sex::parse(raw)
        .map(Some)
        .ok_or_else(|| CliError::Usage(format!("unknown sex `{raw}` (female, male, both or all)")))
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<T>().map_err(|_| CliError::Usage(format!("bad {what} entry `{s}`"))))
        .collect()
}

fn cmd_validate(args: ValidateArgs, resolver: &Resolver) -> Result<(), CliError> {
    let dataset = resolver.get("dataset", args.dataset)?;
    let standard = resolver.get("standard", args.standard)?;
    let reference = resolver.get("reference", args.reference)?;
    if dataset.is_none() && standard.is_none() && reference.is_none() {
        return Err(CliError::Usage(
            "nothing to validate: pass --dataset, --standard and/or --reference".into(),
        ));
    }
    if let Some(path) = dataset {
        let ds = io::read_dataset(&path, None)?;
        println!(
            "{}: ok ({} populations x {} ages)",
            path.display(),
            ds.n_populations(),
            ds.age_grid().len()
        );
    }
    if let Some(path) = standard {
        let file = io::read_standard_file(&path)?;
        let sexes: Vec<&str> = file.schedules().iter().map(|s| s.sex.as_str()).collect();
        println!("{}: ok (schedules for {})", path.display(), sexes.join(", "));
    }
    if let Some(path) = reference {
        let r = io::read_reference(&path)?;
        println!("{}: ok ({} ages)", path.display(), r.n_ages());
    }
    Ok(())
}

// Desk-scale MCMC defaults for interactive runs; the long-run setup
// (burn-in 100000, thin 5000, keep 2000) is reachable through the flags.
const CLI_BURN_IN: usize = 20_000;
const CLI_THIN: usize = 50;
const CLI_KEEP: usize = 400;

fn dyn_config_from(args: &FitArgs, resolver: &Resolver) -> Result<DynPoissonConfig, CliError> {
    let defaults = DynPoissonConfig::default();
    Ok(DynPoissonConfig {
        chains: resolver.get_or("chains", args.chains, defaults.chains)?,
        burn_in: resolver.get_or("burn-in", args.burn_in, CLI_BURN_IN)?,
        thin: resolver.get_or("thin", args.thin, CLI_THIN)?,
        keep: resolver.get_or("keep", args.keep, CLI_KEEP)?,
        seed: resolver.seed,
        proposal_scale_beta: resolver.get_or(
            "scale-beta",
            args.scale_beta,
            defaults.proposal_scale_beta,
        )?,
        proposal_scale_mu: resolver.get_or("scale-mu", args.scale_mu, defaults.proposal_scale_mu)?,
        adapt: !resolver.flag("no-adapt", args.no_adapt)?,
        prior_a: resolver.get_or("prior-a", args.prior_a, defaults.prior_a)?,
        prior_b: resolver.get_or("prior-b", args.prior_b, defaults.prior_b)?,
        init_precision: resolver.get_or(
            "init-precision",
            args.init_precision,
            defaults.init_precision,
        )?,
    })
}

fn per_population_standards(
    dataset: &MortalityDataset,
    standard_file: &io::StandardFile,
) -> Result<Vec<StandardSchedule>, CliError> {
    dataset
        .populations()
        .iter()
        .map(|record| standard_file.select(record.sex))
        .collect()
}

fn cmd_fit(args: FitArgs, resolver: &Resolver) -> Result<(), CliError> {
    let model_raw: String = resolver.require("model", args.model.clone())?;
    let model = ModelKind::parse(&model_raw)
        .filter(|m| *m != ModelKind::Truth)
        .ok_or_else(|| {
            CliError::Usage(format!(
                "unknown model `{model_raw}` (dyn-poisson, topals or gaussian-dlm)"
            ))
        })?;
    let dataset_path: PathBuf = resolver.require("dataset", args.dataset.clone())?;
    let standard_path: PathBuf = resolver.require("standard", args.standard.clone())?;
    let output: PathBuf = resolver.require("output", args.output.clone())?;
    let sex_raw = resolver.get_or("sex", args.sex.clone(), "all".to_string())?;
    let sex_filter = parse_sex_filter(&sex_raw)?;

    let dataset = io::read_dataset(&dataset_path, sex_filter)?;
    let standard_file = io::read_standard_file(&standard_path)?;
    let standards = per_population_standards(&dataset, &standard_file)?;
    for s in &standards {
        if s.n_ages() != dataset.age_grid().len() {
            return Err(CliError::Usage(format!(
                "standard `{}` covers {} ages but the dataset has {}",
                s.label,
                s.n_ages(),
                dataset.age_grid().len()
            )));
        }
    }

    let fits: Vec<FitResult> = match model {
        ModelKind::DynPoisson => {
            let config = dyn_config_from(&args, resolver)?;
            let samples = run_mcmc(&dataset, &standards, &config)?;
            for (c, acc) in samples.acceptance_rates.iter().enumerate() {
                eprintln!(
                    "chain {c}: acceptance beta {:.3}, mu {:.3}",
                    acc.beta, acc.mu
                );
            }
            if config.chains > 1 {
                for (i, record) in dataset.populations().iter().enumerate() {
                    let mu_chains: Vec<Vec<f64>> = samples
                        .draws
                        .iter()
                        .map(|chain| chain.iter().map(|d| d.mu[i]).collect())
                        .collect();
                    eprintln!(
                        "({}, {}): split-Rhat of mu = {:.3}",
                        record.id,
                        record.sex,
                        split_rhat(&mu_chains)
                    );
                }
            }
            posterior_summary(&samples, &dataset, &standards, &[0.025, 0.975])?
        }
        ModelKind::Topals => {
            let options = TopalsOptions {
                penalty_weight: resolver.get_or("penalty-weight", args.penalty_weight, 1.0)?,
                max_iter: resolver.get_or("max-iter", args.max_iter, 50)?,
                tol: resolver.get_or("tol", args.tol, 1e-8)?,
            };
            let knots: Vec<u32> = match resolver.get("knots", args.knots.clone())? {
                Some(raw) => parse_list(&raw, "knot")?,
                None => DEFAULT_KNOTS.to_vec(),
            };
            let basis = build_basis(dataset.age_grid(), &knots)?;
            let mut out = Vec::with_capacity(dataset.n_populations());
            for (record, standard) in dataset.populations().iter().zip(&standards) {
                let fit = topals_fit(record, standard, &basis, &options)?;
                if !fit.converged {
                    eprintln!(
                        "warning: TOPALS did not converge for ({}, {}): gradient norm {:.3e}",
                        record.id, record.sex, fit.final_gradient_norm
                    );
                }
                out.push(FitResult::point(
                    record.id.clone(),
                    record.sex,
                    ModelKind::Topals,
                    fit.fitted_log_rates,
                ));
            }
            out
        }
        ModelKind::GaussianDlm => {
            let options = DlmOptions {
                regression: resolver.flag("dlm-regression", args.dlm_regression)?,
                ..DlmOptions::default()
            };
            let mut out = Vec::with_capacity(dataset.n_populations());
            for (record, standard) in dataset.populations().iter().zip(&standards) {
                out.push(fit_dlm(record, standard, &options)?.fit_result);
            }
            out
        }
        ModelKind::Truth => unreachable!("rejected above"),
    };

    io::write_fits(&fits, &output)?;
    println!("wrote {} fitted schedules to {}", fits.len(), output.display());
    Ok(())
}

fn cmd_simulate(args: SimulateArgs, resolver: &Resolver) -> Result<(), CliError> {
    let reference_path: PathBuf = resolver.require("reference", args.reference.clone())?;
    let output: PathBuf = resolver.require("output", args.output.clone())?;
    let sizes: Vec<f64> = match resolver.get("sizes", args.sizes)? {
        Some(raw) => parse_list(&raw, "size")?,
        None => default_sizes(),
    };
    if sizes.is_empty() {
        return Err(CliError::Usage("no sizes given".into()));
    }
    let reference = io::read_reference(&reference_path)?;
    let mut records = Vec::with_capacity(sizes.len());
    for (i, &size) in sizes.iter().enumerate() {
        let seed = derive_seed(resolver.seed, i as u64);
        records.push(simulate_population(&reference, size, seed)?.record);
    }
    let n_ages = reference.n_ages();
    let dataset = MortalityDataset::new(records, mortsched_core::data::AgeGrid::new(n_ages)?)?;
    io::write_dataset(&dataset, &output)?;
    println!("wrote {} simulated populations to {}", sizes.len(), output.display());
    Ok(())
}

fn cmd_benchmark(args: BenchmarkArgs, resolver: &Resolver) -> Result<(), CliError> {
    let reference_path: PathBuf = resolver.require("reference", args.reference.clone())?;
    let standard_path: PathBuf = resolver.require("standard", args.standard.clone())?;
    let output: PathBuf = resolver.require("output", args.output.clone())?;
    let sizes: Vec<f64> = match resolver.get("sizes", args.sizes)? {
        Some(raw) => parse_list(&raw, "size")?,
        None => default_sizes(),
    };
    let models: Vec<ModelKind> = match resolver.get::<String>("models", args.models)? {
        Some(raw) => raw
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                ModelKind::parse(s)
                    .ok_or_else(|| CliError::Usage(format!("unknown model `{s}`")))
            })
            .collect::<Result<_, _>>()?,
        None => vec![ModelKind::DynPoisson, ModelKind::Topals, ModelKind::GaussianDlm],
    };

    let reference = io::read_reference(&reference_path)?;
    let standard = io::read_standard(&standard_path, Sex::Both)?;
    let defaults = DynPoissonConfig::default();
    let options = BenchmarkOptions {
        dyn_config: DynPoissonConfig {
            chains: resolver.get_or("chains", args.chains, defaults.chains)?,
            burn_in: resolver.get_or("burn-in", args.burn_in, CLI_BURN_IN)?,
            thin: resolver.get_or("thin", args.thin, CLI_THIN)?,
            keep: resolver.get_or("keep", args.keep, CLI_KEEP)?,
            seed: resolver.seed,
            ..defaults
        },
        topals: TopalsOptions {
            penalty_weight: resolver.get_or("penalty-weight", args.penalty_weight, 1.0)?,
            ..TopalsOptions::default()
        },
        dlm: DlmOptions {
            regression: resolver.flag("dlm-regression", args.dlm_regression)?,
            ..DlmOptions::default()
        },
        knots: DEFAULT_KNOTS.to_vec(),
    };
    let seeds: Vec<u64> =
        (0..sizes.len()).map(|i| derive_seed(resolver.seed, i as u64)).collect();

    let rows = run_benchmark(&reference, &sizes, &models, &standard, &seeds, &options)?;
    io::write_metrics_table(&rows, &output)?;

    println!("{:>10} {:>14} {:>10} {:>10} {:>10} {:>8}", "size", "model", "rbias", "rmse", "mape", "secs");
    for row in &rows {
        match &row.outcome {
            Ok(m) => println!(
                "{:>10} {:>14} {:>10.4} {:>10.4} {:>10.4} {:>8.2}",
                row.total_size, row.model.as_str(), m.rbias, m.rmse, m.mape, row.seconds
            ),
            Err(e) => println!(
                "{:>10} {:>14} {:>10} {:>10} {:>10} {:>8.2}  {e}",
                row.total_size, row.model.as_str(), "-", "-", "-", row.seconds
            ),
        }
    }
    eprintln!("metrics table written to {}", output.display());
    Ok(())
}

fn cmd_chart(args: ChartArgs, resolver: &Resolver) -> Result<(), CliError> {
    let dataset_path: PathBuf = resolver.require("dataset", args.dataset.clone())?;
    let area: String = resolver.require("area", args.area.clone())?;
    let standard_path: PathBuf = resolver.require("standard", args.standard.clone())?;
    let output: PathBuf = resolver.require("output", args.output.clone())?;
    let sex_raw = resolver.get_or("sex", args.sex.clone(), "both".to_string())?;
    let sex = Sex::parse(&sex_raw)
        .ok_or_else(|| CliError::Usage(format!("unknown sex `{sex_raw}`")))?;

    let dataset = io::read_dataset(&dataset_path, None)?;
    let record = dataset
        .populations()
        .iter()
        .find(|r| r.id == area && r.sex == sex)
        .ok_or_else(|| {
            CliError::Usage(format!("population ({area}, {sex}) not found in the dataset"))
        })?;
    let observed = naive_rates(record);
    let standard = io::read_standard(&standard_path, sex)?;

    let mut fit_paths = args.fits;
    if fit_paths.is_empty() {
        if let Some(raw) = resolver.config.get("fits") {
            fit_paths = raw.split(',').map(|s| PathBuf::from(s.trim())).collect();
        }
    }
    let mut overlays: Vec<FitResult> = Vec::new();
    for path in &fit_paths {
        for fit in io::read_fits(path)? {
            if fit.id == area && fit.sex == sex {
                overlays.push(fit);
            }
        }
    }

    let title = format!("{area} ({sex})");
    chart::emit_chart(&observed, &overlays, &standard, &title, &output)?;
    println!("wrote chart to {}", output.display());
    Ok(())
}
