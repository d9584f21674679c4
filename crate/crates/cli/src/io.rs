//! Delimited-text ingestion and serialization.
//!
//! All files are UTF-8, comma-delimited with mandatory headers and `.` as the
//! decimal separator. Readers reject rather than repair: a malformed row or a
//! missing (area, sex, age) cell is an error naming the spot, because zero
//! cells are data in this domain, not absence.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use mortsched_core::data::{
    AgeGrid, FitResult, ModelKind, MortalityDataset, PopulationRecord, Sex, StandardSchedule,
};
use mortsched_core::simulation::{BenchmarkRow, ReferenceSchedule};

use crate::error::{CliError, Result};

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn schema(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Schema { path: path.to_path_buf(), message: message.into() }
}

fn schema_at(path: &Path, line: usize, message: impl Into<String>) -> CliError {
    CliError::SchemaAtLine { path: path.to_path_buf(), line, message: message.into() }
}

/// Iterates data lines with their 1-based line numbers after checking the
/// exact header.
fn data_lines<'a>(
    path: &Path,
    contents: &'a str,
    expected_header: &str,
) -> Result<Vec<(usize, &'a str)>> {
    let mut lines = Vec::new();
    let mut saw_header = false;
    for (idx, raw) in contents.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        if !saw_header {
            if line.trim() != expected_header {
                return Err(schema_at(
                    path,
                    idx + 1,
                    format!("expected header `{expected_header}`, found `{line}`"),
                ));
            }
            saw_header = true;
            continue;
        }
        lines.push((idx + 1, line));
    }
    if !saw_header {
        return Err(schema(path, format!("empty file, expected header `{expected_header}`")));
    }
    Ok(lines)
}

fn parse_sex(path: &Path, line: usize, field: &str) -> Result<Sex> {
    Sex::parse(field).ok_or_else(|| {
        schema_at(path, line, format!("unknown sex `{field}` (expected female, male or both)"))
    })
}

fn parse_age(path: &Path, line: usize, field: &str) -> Result<u32> {
    field
        .parse::<u32>()
        .map_err(|_| schema_at(path, line, format!("age `{field}` is not a non-negative integer")))
}

fn parse_finite(path: &Path, line: usize, name: &str, field: &str) -> Result<f64> {
    let v = field
        .parse::<f64>()
        .map_err(|_| schema_at(path, line, format!("{name} `{field}` is not a number")))?;
    if !v.is_finite() {
        return Err(schema_at(path, line, format!("{name} `{field}` is not finite")));
    }
    Ok(v)
}

/// Verifies a sorted (age, line) list covers exactly 0..n_ages-1.
fn check_age_coverage(
    path: &Path,
    rows: &mut [(u32, usize)],
    what: &str,
) -> Result<usize> {
    rows.sort_by_key(|(age, _)| *age);
    for pair in rows.windows(2) {
        if pair[0].0 == pair[1].0 {
            return Err(schema_at(
                path,
                pair[1].1,
                format!("duplicate age {} {what}", pair[1].0),
            ));
        }
    }
    for (expected, (age, _)) in rows.iter().enumerate() {
        if *age != expected as u32 {
            return Err(schema(path, format!("missing age {expected} {what}")));
        }
    }
    Ok(rows.len())
}

// ---------------------------------------------------------------------------
// Standard schedules: `age,sex,log_rate`
// ---------------------------------------------------------------------------

pub const STANDARD_HEADER: &str = "age,sex,log_rate";

/// All sex-specific schedules present in one standard file.
#[derive(Debug, Clone)]
pub struct StandardFile {
    schedules: Vec<StandardSchedule>,
}

impl StandardFile {
    pub fn schedules(&self) -> &[StandardSchedule] {
        &self.schedules
    }

    /// Schedule for one sex; `both` falls back to the elementwise mean of the
    /// female and male log-rates when no explicit `both` rows exist.
    pub fn select(&self, sex: Sex) -> Result<StandardSchedule> {
        if let Some(s) = self.schedules.iter().find(|s| s.sex == sex) {
            return Ok(s.clone());
        }
        if sex == Sex::Both {
            let female = self.schedules.iter().find(|s| s.sex == Sex::Female);
            let male = self.schedules.iter().find(|s| s.sex == Sex::Male);
            if let (Some(f), Some(m)) = (female, male) {
                if f.n_ages() == m.n_ages() {
                    let mean: Vec<f64> = f
                        .log_rates()
                        .iter()
                        .zip(m.log_rates())
                        .map(|(a, b)| 0.5 * (a + b))
                        .collect();
                    let label = format!("{} (mean of female and male)", f.label);
                    return Ok(StandardSchedule::new(label, Sex::Both, mean)?);
                }
            }
        }
        Err(CliError::Usage(format!("standard file has no schedule usable for sex `{sex}`")))
    }
}

/// Parses a standard-schedule file. Every sex present must cover consecutive
/// ages from 0 with no gaps or duplicates.
pub fn read_standard_file(path: &Path) -> Result<StandardFile> {
    let contents = read_to_string(path)?;
    let mut by_sex: HashMap<Sex, Vec<(u32, usize, f64)>> = HashMap::new();
    for (line_no, line) in data_lines(path, &contents, STANDARD_HEADER)? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(schema_at(path, line_no, format!("expected 3 fields, found {}", fields.len())));
        }
        let age = parse_age(path, line_no, fields[0].trim())?;
        let sex = parse_sex(path, line_no, fields[1].trim())?;
        let log_rate = parse_finite(path, line_no, "log_rate", fields[2].trim())?;
        by_sex.entry(sex).or_default().push((age, line_no, log_rate));
    }
    if by_sex.is_empty() {
        return Err(schema(path, "no data rows"));
    }
    let mut schedules = Vec::new();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "standard".into());
    for sex in [Sex::Female, Sex::Male, Sex::Both] {
        let Some(rows) = by_sex.get(&sex) else { continue };
        let mut age_lines: Vec<(u32, usize)> = rows.iter().map(|(a, l, _)| (*a, *l)).collect();
        check_age_coverage(path, &mut age_lines, &format!("for sex {sex}"))?;
        let mut sorted = rows.clone();
        sorted.sort_by_key(|(a, _, _)| *a);
        let log_rates: Vec<f64> = sorted.iter().map(|(_, _, v)| *v).collect();
        schedules.push(StandardSchedule::new(label.clone(), sex, log_rates)?);
    }
    Ok(StandardFile { schedules })
}

/// Reads a standard file and selects one sex in a single step.
pub fn read_standard(path: &Path, sex: Sex) -> Result<StandardSchedule> {
    read_standard_file(path)?.select(sex)
}

// ---------------------------------------------------------------------------
// Mortality datasets: `area_id,sex,age,deaths,exposure`
// ---------------------------------------------------------------------------

pub const DATASET_HEADER: &str = "area_id,sex,age,deaths,exposure";

struct DatasetRow {
    age: u32,
    line: usize,
    deaths: u64,
    exposure: f64,
}

/// Parses a mortality dataset: one population per (area_id, sex) combination,
/// every age cell explicit. `sex_filter` keeps only matching populations
/// after the whole file has been validated.
pub fn read_dataset(path: &Path, sex_filter: Option<Sex>) -> Result<MortalityDataset> {
    let contents = read_to_string(path)?;
    let mut order: Vec<(String, Sex)> = Vec::new();
    let mut groups: HashMap<(String, Sex), Vec<DatasetRow>> = HashMap::new();
    for (line_no, line) in data_lines(path, &contents, DATASET_HEADER)? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(schema_at(path, line_no, format!("expected 5 fields, found {}", fields.len())));
        }
        let area_id = fields[0].trim().to_string();
        if area_id.is_empty() {
            return Err(schema_at(path, line_no, "empty area_id"));
        }
        let sex = parse_sex(path, line_no, fields[1].trim())?;
        let age = parse_age(path, line_no, fields[2].trim())?;
        let deaths_field = fields[3].trim();
        let deaths = deaths_field.parse::<u64>().map_err(|_| {
            schema_at(
                path,
                line_no,
                format!("deaths `{deaths_field}` is not a non-negative integer"),
            )
        })?;
        let exposure = parse_finite(path, line_no, "exposure", fields[4].trim())?;
        if exposure < 0.0 {
            return Err(schema_at(path, line_no, format!("exposure {exposure} is negative")));
        }
        if deaths > 0 && exposure == 0.0 {
            return Err(schema_at(
                path,
                line_no,
                format!("{deaths} deaths with zero exposure"),
            ));
        }
        let key = (area_id, sex);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(DatasetRow { age, line: line_no, deaths, exposure });
    }
    if order.is_empty() {
        return Err(schema(path, "no data rows"));
    }

    let mut n_ages: Option<usize> = None;
    let mut populations = Vec::new();
    for key in &order {
        let rows = groups.get_mut(key).expect("group exists");
        let mut age_lines: Vec<(u32, usize)> = rows.iter().map(|r| (r.age, r.line)).collect();
        let count =
            check_age_coverage(path, &mut age_lines, &format!("for ({}, {})", key.0, key.1))?;
        match n_ages {
            None => n_ages = Some(count),
            Some(a) if a != count => {
                return Err(schema(
                    path,
                    format!(
                        "population ({}, {}) has {count} ages, others have {a}",
                        key.0, key.1
                    ),
                ));
            }
            _ => {}
        }
        rows.sort_by_key(|r| r.age);
        if sex_filter.is_some_and(|f| f != key.1) {
            continue;
        }
        let deaths: Vec<u64> = rows.iter().map(|r| r.deaths).collect();
        let exposures: Vec<f64> = rows.iter().map(|r| r.exposure).collect();
        populations.push(PopulationRecord::new(key.0.clone(), key.1, deaths, exposures)?);
    }
    if populations.is_empty() {
        return Err(CliError::Usage(format!(
            "no populations in {} match the sex filter",
            path.display()
        )));
    }
    let n_ages = n_ages.expect("at least one population");
    Ok(MortalityDataset::new(populations, AgeGrid::new(n_ages)?)?)
}

/// Serializes a dataset in the `read_dataset` schema. Exposures use the
/// shortest round-tripping representation, so write-then-read is exact.
pub fn write_dataset(dataset: &MortalityDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for record in dataset.populations() {
        if record.id.contains(',') {
            return Err(CliError::Usage(format!(
                "area_id `{}` contains a comma and cannot be serialized",
                record.id
            )));
        }
        for (age, (&deaths, &exposure)) in
            record.deaths().iter().zip(record.exposures()).enumerate()
        {
            let _ = writeln!(out, "{},{},{age},{deaths},{exposure}", record.id, record.sex);
        }
    }
    write_string(path, &out)
}

// ---------------------------------------------------------------------------
// Fitted schedules: `area_id,sex,age,log_rate_hat,lower,upper,model`
// ---------------------------------------------------------------------------

pub const FITS_HEADER: &str = "area_id,sex,age,log_rate_hat,lower,upper,model";

/// Writes fitted schedules with fixed six-decimal formatting, ordered by
/// area, sex and age. Fits without intervals leave lower/upper empty.
pub fn write_fits(fits: &[FitResult], path: &Path) -> Result<()> {
    let mut sorted: Vec<&FitResult> = fits.iter().collect();
    sorted.sort_by(|a, b| {
        a.id.cmp(&b.id)
            .then_with(|| a.sex.as_str().cmp(b.sex.as_str()))
            .then_with(|| a.model.as_str().cmp(b.model.as_str()))
    });
    let mut out = String::new();
    out.push_str(FITS_HEADER);
    out.push('\n');
    for fit in sorted {
        if fit.id.contains(',') {
            return Err(CliError::Usage(format!(
                "area_id `{}` contains a comma and cannot be serialized",
                fit.id
            )));
        }
        for age in 0..fit.n_ages() {
            let lower = fit.lower.as_ref().map_or(String::new(), |v| format!("{:.6}", v[age]));
            let upper = fit.upper.as_ref().map_or(String::new(), |v| format!("{:.6}", v[age]));
            let _ = writeln!(
                out,
                "{},{},{age},{:.6},{lower},{upper},{}",
                fit.id, fit.sex, fit.log_rates[age], fit.model
            );
        }
    }
    write_string(path, &out)
}

/// Reads fitted schedules back; the inverse of [`write_fits`] on its own
/// output.
pub fn read_fits(path: &Path) -> Result<Vec<FitResult>> {
    let contents = read_to_string(path)?;
    struct FitRow {
        age: u32,
        line: usize,
        log_rate: f64,
        lower: Option<f64>,
        upper: Option<f64>,
    }
    let mut order: Vec<(String, Sex, ModelKind)> = Vec::new();
    let mut groups: HashMap<(String, Sex, ModelKind), Vec<FitRow>> = HashMap::new();
    for (line_no, line) in data_lines(path, &contents, FITS_HEADER)? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(schema_at(path, line_no, format!("expected 7 fields, found {}", fields.len())));
        }
        let area_id = fields[0].trim().to_string();
        let sex = parse_sex(path, line_no, fields[1].trim())?;
        let age = parse_age(path, line_no, fields[2].trim())?;
        let log_rate = parse_finite(path, line_no, "log_rate_hat", fields[3].trim())?;
        let parse_opt = |name: &str, field: &str| -> Result<Option<f64>> {
            if field.is_empty() {
                Ok(None)
            } else {
                parse_finite(path, line_no, name, field).map(Some)
            }
        };
        let lower = parse_opt("lower", fields[4].trim())?;
        let upper = parse_opt("upper", fields[5].trim())?;
        let model_field = fields[6].trim();
        let model = ModelKind::parse(model_field)
            .ok_or_else(|| schema_at(path, line_no, format!("unknown model `{model_field}`")))?;
        let key = (area_id, sex, model);
        if !groups.contains_key(&key) {
            order.push(key.clone());
        }
        groups.entry(key).or_default().push(FitRow { age, line: line_no, log_rate, lower, upper });
    }
    if order.is_empty() {
        return Err(schema(path, "no data rows"));
    }
    let mut fits = Vec::new();
    for key in order {
        let mut rows = groups.remove(&key).expect("group exists");
        let mut age_lines: Vec<(u32, usize)> = rows.iter().map(|r| (r.age, r.line)).collect();
        check_age_coverage(path, &mut age_lines, &format!("for ({}, {}, {})", key.0, key.1, key.2))?;
        rows.sort_by_key(|r| r.age);
        let has_bounds = rows.iter().all(|r| r.lower.is_some() && r.upper.is_some());
        let none_bounds = rows.iter().all(|r| r.lower.is_none() && r.upper.is_none());
        if !has_bounds && !none_bounds {
            return Err(schema(
                path,
                format!("({}, {}, {}) mixes empty and filled interval bounds", key.0, key.1, key.2),
            ));
        }
        let log_rates: Vec<f64> = rows.iter().map(|r| r.log_rate).collect();
        let fit = if has_bounds {
            FitResult::with_interval(
                key.0,
                key.1,
                key.2,
                log_rates,
                rows.iter().map(|r| r.lower.unwrap()).collect(),
                rows.iter().map(|r| r.upper.unwrap()).collect(),
            )
        } else {
            FitResult::point(key.0, key.1, key.2, log_rates)
        };
        fits.push(fit);
    }
    Ok(fits)
}

// ---------------------------------------------------------------------------
// Reference schedules: `age,share,rate`
// ---------------------------------------------------------------------------

pub const REFERENCE_HEADER: &str = "age,share,rate";

/// Reads a simulation reference: population share and true rate per age.
pub fn read_reference(path: &Path) -> Result<ReferenceSchedule> {
    let contents = read_to_string(path)?;
    let mut rows: Vec<(u32, usize, f64, f64)> = Vec::new();
    for (line_no, line) in data_lines(path, &contents, REFERENCE_HEADER)? {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(schema_at(path, line_no, format!("expected 3 fields, found {}", fields.len())));
        }
        let age = parse_age(path, line_no, fields[0].trim())?;
        let share = parse_finite(path, line_no, "share", fields[1].trim())?;
        let rate = parse_finite(path, line_no, "rate", fields[2].trim())?;
        rows.push((age, line_no, share, rate));
    }
    let mut age_lines: Vec<(u32, usize)> = rows.iter().map(|(a, l, _, _)| (*a, *l)).collect();
    check_age_coverage(path, &mut age_lines, "in reference")?;
    rows.sort_by_key(|(a, _, _, _)| *a);
    let shares: Vec<f64> = rows.iter().map(|(_, _, s, _)| *s).collect();
    let rates: Vec<f64> = rows.iter().map(|(_, _, _, r)| *r).collect();
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "reference".into());
    Ok(ReferenceSchedule::new(label, shares, rates)?)
}

// ---------------------------------------------------------------------------
// Benchmark metrics tables: `size,model,rbias,rmse,mape,n_ages_used,status`
// ---------------------------------------------------------------------------

pub const METRICS_HEADER: &str = "size,model,rbias,rmse,mape,n_ages_used,status";

fn format_size(size: f64) -> String {
    if size.fract() == 0.0 && size < u64::MAX as f64 {
        format!("{}", size as u64)
    } else {
        format!("{size}")
    }
}

/// Writes the benchmark metrics table. Wall-clock timings are deliberately
/// excluded so the file is byte-identical across runs with the same seeds;
/// failed cells keep their row with the error in the status column.
pub fn write_metrics_table(rows: &[BenchmarkRow], path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for row in rows {
        match &row.outcome {
            Ok(m) => {
                let _ = writeln!(
                    out,
                    "{},{},{:.6},{:.6},{:.6},{},ok",
                    format_size(row.total_size),
                    row.model,
                    m.rbias,
                    m.rmse,
                    m.mape,
                    m.n_ages_used
                );
            }
            Err(message) => {
                let clean = message.replace([',', '\n'], ";");
                let _ = writeln!(
                    out,
                    "{},{},,,,,{clean}",
                    format_size(row.total_size),
                    row.model
                );
            }
        }
    }
    write_string(path, &out)
}

// ---------------------------------------------------------------------------
// Flat key=value run configuration files
// ---------------------------------------------------------------------------

/// Parses a flat `key = value` config file; `#` starts a comment.
pub fn read_config(path: &Path) -> Result<HashMap<String, String>> {
    let contents = read_to_string(path)?;
    let mut map = HashMap::new();
    for (idx, raw) in contents.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(schema_at(path, idx + 1, format!("expected `key = value`, found `{line}`")));
        };
        map.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(map)
}
