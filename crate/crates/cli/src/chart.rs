//! Self-contained SVG charts of observed and fitted log-mortality schedules.
//!
//! The layout follows the figures this domain is read through: open circles
//! for observed log-rates, tick marks on the age axis where the rate is
//! undefined (no deaths or no exposure), one curve per fitted model, one for
//! the standard.

use std::fmt::Write as _;
use std::path::Path;

use mortsched_core::data::{FitResult, ModelKind, ObservedRates, RateCell, StandardSchedule};

use crate::error::{CliError, Result};

const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 560.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 60.0;

fn model_color(model: ModelKind) -> &'static str {
    match model {
        ModelKind::DynPoisson => "#d62728", // red
        ModelKind::Topals => "#9467bd",     // purple
        ModelKind::GaussianDlm => "#1f77b4", // blue
        ModelKind::Truth => "#000000",
    }
}

const STANDARD_COLOR: &str = "#2ca02c"; // green

struct Mapper {
    n_ages: usize,
    y_min: f64,
    y_max: f64,
}

impl Mapper {
    fn x(&self, age: usize) -> f64 {
        let span = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
        MARGIN_LEFT + span * age as f64 / (self.n_ages.max(2) - 1) as f64
    }

    fn y(&self, value: f64) -> f64 {
        let span = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
        let t = (value - self.y_min) / (self.y_max - self.y_min);
        HEIGHT - MARGIN_BOTTOM - span * t
    }
}

fn polyline(map: &Mapper, values: &[f64], color: &str, dash: Option<&str>) -> String {
    let mut points = String::new();
    for (age, v) in values.iter().enumerate() {
        let _ = write!(points, "{:.2},{:.2} ", map.x(age), map.y(*v));
    }
    let dash_attr = dash.map_or(String::new(), |d| format!(" stroke-dasharray=\"{d}\""));
    format!(
        "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"{dash_attr} points=\"{}\"/>\n",
        points.trim_end()
    )
}

/// Renders observed rates, fitted curves and the standard into one SVG file.
/// Every series must share the same age grid.
pub fn emit_chart(
    observed: &ObservedRates,
    fits: &[FitResult],
    standard: &StandardSchedule,
    title: &str,
    path: &Path,
) -> Result<()> {
    let n_ages = observed.len();
    if standard.n_ages() != n_ages {
        return Err(CliError::Usage(format!(
            "standard has {} ages, observed series has {n_ages}",
            standard.n_ages()
        )));
    }
    for fit in fits {
        if fit.n_ages() != n_ages {
            return Err(CliError::Usage(format!(
                "fit ({}, {}, {}) has {} ages, observed series has {n_ages}",
                fit.id,
                fit.sex,
                fit.model,
                fit.n_ages()
            )));
        }
    }

    // y-range over every drawable value
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    let mut take = |v: f64| {
        y_min = y_min.min(v);
        y_max = y_max.max(v);
    };
    for cell in observed.cells() {
        if let RateCell::Rate(r) = cell {
            take(r.ln());
        }
    }
    for fit in fits {
        fit.log_rates.iter().for_each(|v| take(*v));
    }
    standard.log_rates().iter().for_each(|v| take(*v));
    if !y_min.is_finite() {
        // nothing but the axis ticks to draw; keep a sane default window
        y_min = -12.0;
        y_max = 0.0;
    }
    let pad = 0.05 * (y_max - y_min).max(1e-6);
    let map = Mapper { n_ages, y_min: y_min - pad, y_max: y_max + pad };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">"
    );
    let _ = writeln!(svg, "  <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        escape_text(title)
    );

    // frame
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = MARGIN_TOP;
    let y1 = HEIGHT - MARGIN_BOTTOM;
    let _ = writeln!(
        svg,
        "  <rect x=\"{x0:.2}\" y=\"{y0:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333333\"/>",
        x1 - x0,
        y1 - y0
    );

    // x ticks every 10 ages
    for age in (0..n_ages).step_by(10) {
        let x = map.x(age);
        let _ = writeln!(
            svg,
            "  <line x1=\"{x:.2}\" y1=\"{y1:.2}\" x2=\"{x:.2}\" y2=\"{:.2}\" stroke=\"#333333\"/>",
            y1 + 6.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{x:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{age}</text>",
            y1 + 20.0
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">age</text>",
        (x0 + x1) / 2.0,
        y1 + 40.0
    );

    // y ticks at ~6 round values
    let tick_count = 6;
    for i in 0..=tick_count {
        let v = map.y_min + (map.y_max - map.y_min) * i as f64 / tick_count as f64;
        let y = map.y(v);
        let _ = writeln!(
            svg,
            "  <line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{x0:.2}\" y2=\"{y:.2}\" stroke=\"#333333\"/>",
            x0 - 6.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{v:.1}</text>",
            x0 - 9.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "  <text x=\"18\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {:.2})\">log mortality rate</text>",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0
    );

    // tick marks at ages with no computable rate
    for (age, cell) in observed.cells().iter().enumerate() {
        if !matches!(cell, RateCell::Rate(_)) {
            let x = map.x(age);
            let _ = writeln!(
                svg,
                "  <line x1=\"{x:.2}\" y1=\"{:.2}\" x2=\"{x:.2}\" y2=\"{y1:.2}\" stroke=\"#777777\" stroke-width=\"1\"/>",
                y1 - 7.0
            );
        }
    }

    // standard first so fitted curves draw on top
    svg.push_str(&polyline(&map, standard.log_rates(), STANDARD_COLOR, Some("5 3")));
    for fit in fits {
        svg.push_str(&polyline(&map, &fit.log_rates, model_color(fit.model), None));
    }

    // observed circles above everything
    for (age, cell) in observed.cells().iter().enumerate() {
        if let RateCell::Rate(r) = cell {
            let _ = writeln!(
                svg,
                "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"none\" stroke=\"#000000\"/>",
                map.x(age),
                map.y(r.ln())
            );
        }
    }

    // legend
    let legend_x = x1 + 14.0;
    let mut legend_y = y0 + 16.0;
    let mut legend_entry = |svg: &mut String, color: &str, dash: Option<&str>, label: &str| {
        let dash_attr = dash.map_or(String::new(), |d| format!(" stroke-dasharray=\"{d}\""));
        let _ = writeln!(
            svg,
            "  <line x1=\"{legend_x:.2}\" y1=\"{legend_y:.2}\" x2=\"{:.2}\" y2=\"{legend_y:.2}\" stroke=\"{color}\" stroke-width=\"2\"{dash_attr}/>",
            legend_x + 26.0
        );
        let _ = writeln!(
            svg,
            "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            legend_x + 32.0,
            legend_y + 4.0,
            escape_text(label)
        );
        legend_y += 20.0;
    };
    legend_entry(&mut svg, STANDARD_COLOR, Some("5 3"), "standard");
    for fit in fits {
        legend_entry(&mut svg, model_color(fit.model), None, fit.model.as_str());
    }
    let _ = writeln!(
        svg,
        "  <circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.6\" fill=\"none\" stroke=\"#000000\"/>",
        legend_x + 13.0,
        legend_y
    );
    let _ = writeln!(
        svg,
        "  <text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\">observed</text>",
        legend_x + 32.0,
        legend_y + 4.0
    );
    svg.push_str("</svg>\n");

    std::fs::write(path, svg)
        .map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn escape_text(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use mortsched_core::data::{naive_rates, PopulationRecord, Sex};

    fn tmp(name: &str) -> std::path::PathBuf {
        let mut p = std::env::temp_dir();
        p.push(format!("mortsched-chart-{}-{name}", std::process::id()));
        p
    }

    #[test]
    fn chart_without_fits_has_standard_and_circles() {
        let record = PopulationRecord::new(
            "x",
            Sex::Both,
            vec![1, 0, 2, 0],
            vec![10.0, 10.0, 10.0, 0.0],
        )
        .unwrap();
        let observed = naive_rates(&record);
        let standard = StandardSchedule::new("s", Sex::Both, vec![-3.0; 4]).unwrap();
        let path = tmp("plain.svg");
        emit_chart(&observed, &[], &standard, "test", &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.starts_with("<svg"));
        // two observed circles (plus one legend marker)
        assert_eq!(svg.matches("<circle").count(), 3);
        // two undefined-rate tick marks
        assert!(svg.matches("#777777").count() == 2);
        assert!(svg.contains("standard"));
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn chart_all_zero_deaths_draws_all_ticks_and_no_circles() {
        let record =
            PopulationRecord::new("x", Sex::Both, vec![0; 5], vec![10.0; 5]).unwrap();
        let observed = naive_rates(&record);
        let standard = StandardSchedule::new("s", Sex::Both, vec![-3.0; 5]).unwrap();
        let path = tmp("ticks.svg");
        emit_chart(&observed, &[], &standard, "t", &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert_eq!(svg.matches("#777777").count(), 5);
        // only the legend marker circle remains
        assert_eq!(svg.matches("<circle").count(), 1);
        std::fs::remove_file(&path).ok();
    }

    #[test]
    fn chart_with_two_models_has_two_styled_curves() {
        let record =
            PopulationRecord::new("x", Sex::Both, vec![1, 1, 1], vec![10.0; 3]).unwrap();
        let observed = naive_rates(&record);
        let standard = StandardSchedule::new("s", Sex::Both, vec![-3.0; 3]).unwrap();
        let fits = vec![
            FitResult::point("x", Sex::Both, ModelKind::Topals, vec![-2.9, -2.8, -2.7]),
            FitResult::point("x", Sex::Both, ModelKind::GaussianDlm, vec![-3.1, -3.0, -2.9]),
        ];
        let path = tmp("models.svg");
        emit_chart(&observed, &fits, &standard, "t", &path).unwrap();
        let svg = std::fs::read_to_string(&path).unwrap();
        assert!(svg.contains(model_color(ModelKind::Topals)));
        assert!(svg.contains(model_color(ModelKind::GaussianDlm)));
        assert!(svg.contains(">topals<"));
        assert!(svg.contains(">gaussian-dlm<"));
        std::fs::remove_file(&path).ok();
    }
}
