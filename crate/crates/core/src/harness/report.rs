use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::{Deserialize, Serialize};

use super::eval::RobustnessReport;
use crate::data::{CLASS_NAMES, CLUTTER};
use crate::error::{validation_err, Error, Result};
use crate::metrics::{csv_row, CSV_HEADER};

pub const REPORT_JSON: &str = "report.json";
pub const CURVES_CSV: &str = "curves.csv";
pub const OA_PLOT: &str = "oa_vs_fraction.svg";
pub const MEAN_F1_PLOT: &str = "mean_f1_vs_fraction.svg";

pub fn curves_csv(report: &RobustnessReport) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in &report.rows {
        out.push_str(&csv_row(r));
        out.push('\n');
    }
    out
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

fn line_plot(path: &Path, title: &str, y_label: &str, points: &[(f64, f64)]) -> Result<()> {
    let root = SVGBackend::new(path, (640, 420)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let x_max = points.iter().map(|p| p.0).fold(0.0, f64::max).max(0.05) * 100.0;
    let y_lo = points.iter().map(|p| p.1).fold(1.0, f64::min);
    let y_min = ((y_lo * 100.0 - 5.0) / 5.0).floor().max(0.0) * 5.0;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(0.0..x_max, y_min..100.0)
        .map_err(plot_err)?;
    chart
        .configure_mesh()
        .x_desc("damaged area (%)")
        .y_desc(y_label)
        .draw()
        .map_err(plot_err)?;
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x * 100.0, y * 100.0)).collect();
    chart
        .draw_series(LineSeries::new(pts.clone(), &BLUE))
        .map_err(plot_err)?;
    chart
        .draw_series(pts.iter().map(|&p| Circle::new(p, 4, BLUE.filled())))
        .map_err(plot_err)?;
    root.present().map_err(plot_err)
}

/// Writes `report.json`, `curves.csv` and the OA and mean-F1 curves as SVG.
pub fn emit_report(report: &RobustnessReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    report.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let json = out_dir.join(REPORT_JSON);
    fs::write(&json, serde_json::to_string_pretty(report)?).map_err(|e| Error::io(&json, e))?;
    let csv = out_dir.join(CURVES_CSV);
    fs::write(&csv, curves_csv(report)).map_err(|e| Error::io(&csv, e))?;

    let oa: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.damage_fraction, r.oa)).collect();
    let mf1: Vec<(f64, f64)> = report.rows.iter().map(|r| (r.damage_fraction, r.mean_f1)).collect();
    let oa_plot = out_dir.join(OA_PLOT);
    line_plot(&oa_plot, "Overall accuracy", "OA (%)", &oa)?;
    let f1_plot = out_dir.join(MEAN_F1_PLOT);
    line_plot(&f1_plot, "Mean F1", "mean F1 (%)", &mf1)?;
    Ok(vec![json, csv, oa_plot, f1_plot])
}

pub fn load_report(path: &Path) -> Result<RobustnessReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let report: RobustnessReport = serde_json::from_str(&text)?;
    report.validate()?;
    Ok(report)
}

/// Scores of one method at one damage degree, in percent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeScores {
    /// Column label such as `"20%"`.
    pub degree: String,
    /// F1 of the five scored classes, in [`CLASS_NAMES`] order.
    pub class_f1: Vec<f64>,
    pub oa: f64,
    pub mean_f1: f64,
}

impl DegreeScores {
    pub fn recomputed_mean_f1(&self) -> f64 {
        self.class_f1.iter().sum::<f64>() / self.class_f1.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodScores {
    pub method: String,
    pub degrees: Vec<DegreeScores>,
}

impl MethodScores {
    /// Converts a sweep into percentages, one degree per row.
    pub fn from_report(method: &str, report: &RobustnessReport) -> Self {
        MethodScores {
            method: method.to_string(),
            degrees: report
                .rows
                .iter()
                .map(|r| DegreeScores {
                    degree: format!("{}%", (r.damage_fraction * 100.0).round()),
                    class_f1: r
                        .per_class_f1
                        .iter()
                        .enumerate()
                        .filter(|&(k, _)| k != CLUTTER)
                        .map(|(_, v)| v * 100.0)
                        .collect(),
                    oa: r.oa * 100.0,
                    mean_f1: r.mean_f1 * 100.0,
                })
                .collect(),
        }
    }
}

/// Side-by-side comparison of methods across damage degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub methods: Vec<MethodScores>,
}

impl ComparisonTable {
    pub fn validate(&self) -> Result<()> {
        let scored = CLASS_NAMES.len() - 1;
        for m in &self.methods {
            if m.degrees.is_empty() {
                return Err(validation_err!("method {} has no degrees", m.method));
            }
            if let Some(d) = m.degrees.iter().find(|d| d.class_f1.len() != scored) {
                return Err(validation_err!(
                    "method {} degree {}: expected {scored} class scores, got {}",
                    m.method,
                    d.degree,
                    d.class_f1.len()
                ));
            }
        }
        if self.methods.is_empty() {
            return Err(validation_err!("comparison table has no methods"));
        }
        Ok(())
    }

    /// Markdown table: one row per class then OA and Mean F1, one column
    /// per (method, degree), methods grouped left to right.
    pub fn render(&self) -> Result<String> {
        self.validate()?;
        let cols: Vec<(&MethodScores, &DegreeScores)> = self
            .methods
            .iter()
            .flat_map(|m| m.degrees.iter().map(move |d| (m, d)))
            .collect();
        let mut out = String::new();
        let mut line = |cells: Vec<String>| {
            let _ = writeln!(out, "| {} |", cells.join(" | "));
        };
        line(
            std::iter::once("Method".to_string())
                .chain(cols.iter().map(|(m, _)| m.method.clone()))
                .collect(),
        );
        line(vec!["---".to_string(); cols.len() + 1]);
        line(
            std::iter::once("Degree".to_string())
                .chain(cols.iter().map(|(_, d)| d.degree.clone()))
                .collect(),
        );
        let scored = CLASS_NAMES.iter().enumerate().filter(|&(k, _)| k != CLUTTER);
        for (i, (_, name)) in scored.enumerate() {
            line(
                std::iter::once(name.to_string())
                    .chain(cols.iter().map(|(_, d)| format!("{:.1}", d.class_f1[i])))
                    .collect(),
            );
        }
        line(
            std::iter::once("OA".to_string())
                .chain(cols.iter().map(|(_, d)| format!("{:.1}", d.oa)))
                .collect(),
        );
        line(
            std::iter::once("Mean F1".to_string())
                .chain(cols.iter().map(|(_, d)| format!("{:.1}", d.mean_f1)))
                .collect(),
        );
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{ConfusionMatrix, MetricsReport};

    fn report(fractions: &[f64]) -> RobustnessReport {
        let cm = ConfusionMatrix::from_counts(
            (0..6).map(|i| (0..6).map(|j| if i == j { 7 } else { (i + j) as u64 % 3 }).collect()).collect(),
        )
        .unwrap();
        RobustnessReport {
            checkpoint_id: "c".into(),
            dataset_id: "d".into(),
            seed: 0,
            rows: fractions
                .iter()
                .map(|&f| MetricsReport::from_confusion(&cm, f).unwrap())
                .collect(),
        }
    }

    #[test]
    fn single_fraction_csv_has_one_row() {
        let csv = curves_csv(&report(&[0.0]));
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert_eq!(lines[0], CSV_HEADER);
    }

    #[test]
    fn csv_values_round_trip_exactly() {
        let r = report(&[0.0, 0.2]);
        let csv = curves_csv(&r);
        for (line, row) in csv.lines().skip(1).zip(&r.rows) {
            let v: Vec<f64> = line.split(',').map(|x| x.parse().unwrap()).collect();
            assert_eq!(v[1], row.oa);
            assert_eq!(v[2], row.mean_f1);
            assert_eq!(&v[3..], &row.per_class_f1[..]);
        }
    }

    #[test]
    fn emit_writes_all_files() {
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&report(&[0.0, 0.2, 0.5]), dir.path()).unwrap();
        assert_eq!(files.len(), 4);
        for f in &files {
            assert!(fs::metadata(f).unwrap().len() > 0);
        }
        let back = load_report(&dir.path().join(REPORT_JSON)).unwrap();
        assert_eq!(back, report(&[0.0, 0.2, 0.5]));
    }

    #[test]
    fn non_increasing_fractions_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_report(&report(&[0.2, 0.2]), dir.path()).is_err());
    }
}
