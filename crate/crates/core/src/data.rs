//! Rectangular mortality data model shared by every estimator.
//!
//! Deaths and exposures live in per-population vectors over a common grid of
//! single-year ages; the standard schedule is the log-mortality covariate all
//! relational fits borrow shape from.

use crate::error::{Error, Result};

/// Consecutive single-year ages starting at 0 (default 0..=99).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgeGrid {
    ages: Vec<u32>,
}

impl AgeGrid {
    /// Grid of `n_ages` consecutive ages `0..n_ages`. Requires `n_ages >= 2`.
    pub fn new(n_ages: usize) -> Result<Self> {
        if n_ages < 2 {
            return Err(Error::Validation(format!(
                "age grid needs at least 2 ages, got {n_ages}"
            )));
        }
        Ok(Self { ages: (0..n_ages as u32).collect() })
    }

    /// The complete single-year grid 0..=99 used throughout the toolkit.
    pub fn complete() -> Self {
        Self::new(100).expect("100 >= 2")
    }

    pub fn len(&self) -> usize {
        self.ages.len()
    }

    pub fn is_empty(&self) -> bool {
        false // invariant: at least 2 ages
    }

    pub fn ages(&self) -> &[u32] {
        &self.ages
    }

    pub fn max_age(&self) -> u32 {
        *self.ages.last().expect("non-empty")
    }
}

/// Sex stratum of a population or standard schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sex {
    Female,
    Male,
    Both,
}

impl Sex {
    pub fn as_str(&self) -> &'static str {
        match self {
            Sex::Female => "female",
            Sex::Male => "male",
            Sex::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Option<Sex> {
        match s {
            "female" => Some(Sex::Female),
            "male" => Some(Sex::Male),
            "both" => Some(Sex::Both),
            _ => None,
        }
    }
}

impl std::fmt::Display for Sex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Death counts and person-year exposures for one population over an age grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationRecord {
    pub id: String,
    pub sex: Sex,
    deaths: Vec<u64>,
    exposures: Vec<f64>,
}

impl PopulationRecord {
    /// Validates lengths, finiteness and the no-deaths-without-exposure rule.
    pub fn new(id: impl Into<String>, sex: Sex, deaths: Vec<u64>, exposures: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if deaths.len() != exposures.len() {
            return Err(Error::Validation(format!(
                "population {id}: deaths length {} != exposures length {}",
                deaths.len(),
                exposures.len()
            )));
        }
        if deaths.is_empty() {
            return Err(Error::Validation(format!("population {id}: empty vectors")));
        }
        for (x, (&y, &e)) in deaths.iter().zip(&exposures).enumerate() {
            if !e.is_finite() || e < 0.0 {
                return Err(Error::Validation(format!(
                    "population {id}: exposure at age {x} is {e}, must be finite and >= 0"
                )));
            }
            if y > 0 && e == 0.0 {
                return Err(Error::Validation(format!(
                    "population {id}: {y} deaths with zero exposure at age {x}"
                )));
            }
        }
        Ok(Self { id, sex, deaths, exposures })
    }

    pub fn n_ages(&self) -> usize {
        self.deaths.len()
    }

    pub fn deaths(&self) -> &[u64] {
        &self.deaths
    }

    pub fn exposures(&self) -> &[f64] {
        &self.exposures
    }
}

/// A set of populations sharing one age grid.
#[derive(Debug, Clone)]
pub struct MortalityDataset {
    populations: Vec<PopulationRecord>,
    age_grid: AgeGrid,
}

impl MortalityDataset {
    /// Validates that every record spans the grid and that (id, sex) pairs are unique.
    pub fn new(populations: Vec<PopulationRecord>, age_grid: AgeGrid) -> Result<Self> {
        if populations.is_empty() {
            return Err(Error::Validation("dataset has no populations".into()));
        }
        for rec in &populations {
            if rec.n_ages() != age_grid.len() {
                return Err(Error::Validation(format!(
                    "population {}: {} ages, grid has {}",
                    rec.id,
                    rec.n_ages(),
                    age_grid.len()
                )));
            }
        }
        let mut seen: Vec<(&str, Sex)> = Vec::with_capacity(populations.len());
        for rec in &populations {
            let key = (rec.id.as_str(), rec.sex);
            if seen.contains(&key) {
                return Err(Error::Validation(format!(
                    "duplicate population ({}, {})",
                    rec.id, rec.sex
                )));
            }
            seen.push(key);
        }
        Ok(Self { populations, age_grid })
    }

    pub fn populations(&self) -> &[PopulationRecord] {
        &self.populations
    }

    pub fn age_grid(&self) -> &AgeGrid {
        &self.age_grid
    }

    pub fn n_populations(&self) -> usize {
        self.populations.len()
    }
}

/// Standard log-mortality schedule (the relational covariate), stored on the
/// log scale so both estimators consume it without re-transformation.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardSchedule {
    pub label: String,
    pub sex: Sex,
    log_rates: Vec<f64>,
}

impl StandardSchedule {
    pub fn new(label: impl Into<String>, sex: Sex, log_rates: Vec<f64>) -> Result<Self> {
        let label = label.into();
        if log_rates.len() < 2 {
            return Err(Error::Validation(format!(
                "standard {label}: needs at least 2 ages"
            )));
        }
        if let Some(x) = log_rates.iter().position(|v| !v.is_finite()) {
            return Err(Error::Validation(format!(
                "standard {label}: non-finite log-rate at age {x}"
            )));
        }
        Ok(Self { label, sex, log_rates })
    }

    pub fn log_rates(&self) -> &[f64] {
        &self.log_rates
    }

    pub fn n_ages(&self) -> usize {
        self.log_rates.len()
    }
}

/// Per-age observed-rate cell: a rate is only defined when both deaths and
/// exposure are positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateCell {
    Rate(f64),
    ZeroDeaths,
    NoExposure,
}

/// Naive observed rates M = Y/E with degenerate cells classified, not repaired.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedRates {
    cells: Vec<RateCell>,
}

impl ObservedRates {
    pub fn cells(&self) -> &[RateCell] {
        &self.cells
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

/// Observed death rates Y/E per age, with zero-death and zero-exposure cells
/// kept apart because only positive cells have a log-rate.
pub fn naive_rates(record: &PopulationRecord) -> ObservedRates {
    let cells = record
        .deaths()
        .iter()
        .zip(record.exposures())
        .map(|(&y, &e)| {
            if e == 0.0 {
                RateCell::NoExposure
            } else if y == 0 {
                RateCell::ZeroDeaths
            } else {
                RateCell::Rate(y as f64 / e)
            }
        })
        .collect();
    ObservedRates { cells }
}

/// Log of each observed rate; undefined cells map to `None`.
pub fn log_rates(rates: &ObservedRates) -> Vec<Option<f64>> {
    rates
        .cells()
        .iter()
        .map(|cell| match cell {
            RateCell::Rate(r) => Some(r.ln()),
            RateCell::ZeroDeaths | RateCell::NoExposure => None,
        })
        .collect()
}

/// Which estimator produced a fitted schedule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    DynPoisson,
    Topals,
    GaussianDlm,
    /// Identity passthrough of the true schedule, used by the benchmark.
    Truth,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::DynPoisson => "dyn-poisson",
            ModelKind::Topals => "topals",
            ModelKind::GaussianDlm => "gaussian-dlm",
            ModelKind::Truth => "truth",
        }
    }

    pub fn parse(s: &str) -> Option<ModelKind> {
        match s {
            "dyn-poisson" => Some(ModelKind::DynPoisson),
            "topals" => Some(ModelKind::Topals),
            "gaussian-dlm" => Some(ModelKind::GaussianDlm),
            "truth" => Some(ModelKind::Truth),
            _ => None,
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Unified fitted log-schedule: point estimate plus optional interval bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub id: String,
    pub sex: Sex,
    pub model: ModelKind,
    pub log_rates: Vec<f64>,
    pub lower: Option<Vec<f64>>,
    pub upper: Option<Vec<f64>>,
}

impl FitResult {
    pub fn point(id: impl Into<String>, sex: Sex, model: ModelKind, log_rates: Vec<f64>) -> Self {
        Self { id: id.into(), sex, model, log_rates, lower: None, upper: None }
    }

    pub fn with_interval(
        id: impl Into<String>,
        sex: Sex,
        model: ModelKind,
        log_rates: Vec<f64>,
        lower: Vec<f64>,
        upper: Vec<f64>,
    ) -> Self {
        Self { id: id.into(), sex, model, log_rates, lower: Some(lower), upper: Some(upper) }
    }

    pub fn n_ages(&self) -> usize {
        self.log_rates.len()
    }
}
