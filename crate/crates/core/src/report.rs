//! Experiment grids and their JSON, CSV and pipe-table renderings.
//!
//! JSON layout (`schema_version` "1.x"):
//!
//! ```json
//! {
//!   "schema_version": "1.0",
//!   "cells": [
//!     {
//!       "backbone": "mobilenet", "classifier": "svm", "variant": "segmented",
//!       "status": "ok",
//!       "aggregate": { "accuracy": 0.968, "precision": ..., "recall": ..., "f1": ...,
//!                      "per_class": [...], "degenerate_flags": [...] },
//!       "folds": [ { "fold": 0, "metrics": {...}, "confusion": {...},
//!                    "train_time_s": ..., "predict_time_s": ... } ],
//!       "timings": { "mean_train_time_s": ..., "mean_predict_time_s": ... },
//!       "config": { ... }
//!     }
//!   ]
//! }
//! ```
//!
//! Failed cells carry `"status": "failed"` and an `"error"` message instead
//! of metrics.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::ClassifierKind;
use crate::dataset::ImageVariant;
use crate::eval::{ConfigEcho, EvalReport, FoldResult, MetricSet};
use crate::features::Backbone;
use crate::fsutil::write_atomic;

pub const SCHEMA_VERSION: &str = "1.0";
const SCHEMA_MAJOR: u32 = 1;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no cells for variant `{0}`")]
    EmptyGrid(ImageVariant),
    #[error("report has no variant in its config echo")]
    MissingVariant,
    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad report JSON: {0}")]
    Parse(String),
    #[error("unsupported schema version `{0}`")]
    UnsupportedVersion(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub backbone: String,
    pub classifier: ClassifierKind,
    pub variant: ImageVariant,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    Done(EvalReport),
    Failed(String),
}

/// Results keyed by (backbone, classifier, variant).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentGrid {
    cells: BTreeMap<CellKey, CellOutcome>,
}

impl ExperimentGrid {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a finished report under the key taken from its own config echo.
    pub fn insert(&mut self, report: EvalReport) -> Result<CellKey, ReportError> {
        let key = CellKey {
            backbone: report.config.backbone.clone(),
            classifier: report.config.classifier,
            variant: report.config.variant.ok_or(ReportError::MissingVariant)?,
        };
        self.cells.insert(key.clone(), CellOutcome::Done(report));
        Ok(key)
    }

    pub fn insert_failure(&mut self, key: CellKey, error: impl Into<String>) {
        self.cells.insert(key, CellOutcome::Failed(error.into()));
    }

    pub fn get(&self, key: &CellKey) -> Option<&CellOutcome> {
        self.cells.get(key)
    }

    pub fn cells(&self) -> impl Iterator<Item = (&CellKey, &CellOutcome)> {
        self.cells.iter()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn report(&self, backbone: &str, classifier: ClassifierKind, variant: ImageVariant) -> Option<&EvalReport> {
        let key = CellKey {
            backbone: backbone.to_string(),
            classifier,
            variant,
        };
        match self.cells.get(&key) {
            Some(CellOutcome::Done(r)) => Some(r),
            _ => None,
        }
    }

    pub fn has_failures(&self) -> bool {
        self.cells.values().any(|c| matches!(c, CellOutcome::Failed(_)))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTimings {
    pub mean_train_time_s: f64,
    pub mean_predict_time_s: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CellDoc {
    backbone: String,
    classifier: ClassifierKind,
    variant: ImageVariant,
    status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    aggregate: Option<MetricSet>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    folds: Vec<FoldResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timings: Option<CellTimings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    config: Option<ConfigEcho>,
}

#[derive(Debug, Serialize, Deserialize)]
struct GridDoc {
    schema_version: String,
    cells: Vec<CellDoc>,
}

fn check_version(version: &str) -> Result<(), ReportError> {
    let major = version.split('.').next().and_then(|m| m.parse::<u32>().ok());
    if major == Some(SCHEMA_MAJOR) {
        Ok(())
    } else {
        Err(ReportError::UnsupportedVersion(version.to_string()))
    }
}

pub fn grid_to_json(grid: &ExperimentGrid) -> String {
    let cells = grid
        .cells
        .iter()
        .map(|(key, outcome)| {
            let mut doc = CellDoc {
                backbone: key.backbone.clone(),
                classifier: key.classifier,
                variant: key.variant,
                status: "ok".into(),
                error: None,
                aggregate: None,
                folds: Vec::new(),
                timings: None,
                config: None,
            };
            match outcome {
                CellOutcome::Done(r) => {
                    doc.aggregate = Some(r.aggregate.clone());
                    doc.folds = r.per_fold.clone();
                    doc.timings = Some(CellTimings {
                        mean_train_time_s: r.mean_train_time_s(),
                        mean_predict_time_s: r.mean_predict_time_s(),
                    });
                    doc.config = Some(r.config.clone());
                }
                CellOutcome::Failed(e) => {
                    doc.status = "failed".into();
                    doc.error = Some(e.clone());
                }
            }
            doc
        })
        .collect();
    let doc = GridDoc {
        schema_version: SCHEMA_VERSION.into(),
        cells,
    };
    serde_json::to_string_pretty(&doc).expect("grid serialises")
}

pub fn grid_from_json(text: &str) -> Result<ExperimentGrid, ReportError> {
    let doc: GridDoc = serde_json::from_str(text).map_err(|e| ReportError::Parse(e.to_string()))?;
    check_version(&doc.schema_version)?;
    let mut grid = ExperimentGrid::new();
    for cell in doc.cells {
        let key = CellKey {
            backbone: cell.backbone,
            classifier: cell.classifier,
            variant: cell.variant,
        };
        let outcome = match (cell.status.as_str(), cell.aggregate, cell.config) {
            ("ok", Some(aggregate), Some(config)) => CellOutcome::Done(EvalReport {
                config,
                per_fold: cell.folds,
                aggregate,
            }),
            ("failed", _, _) => CellOutcome::Failed(cell.error.unwrap_or_default()),
            (status, _, _) => {
                return Err(ReportError::Parse(format!(
                    "cell {}/{}/{} has status `{status}` without complete results",
                    key.backbone, key.classifier, key.variant
                )))
            }
        };
        grid.cells.insert(key, outcome);
    }
    Ok(grid)
}

fn write_text(path: &Path, text: &str) -> Result<(), ReportError> {
    write_atomic(path, |w| w.write_all(text.as_bytes())).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_grid_json(grid: &ExperimentGrid, path: &Path) -> Result<(), ReportError> {
    write_text(path, &grid_to_json(grid))
}

pub fn read_grid_json(path: &Path) -> Result<ExperimentGrid, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    grid_from_json(&text)
}

#[derive(Debug, Serialize, Deserialize)]
struct ReportDoc {
    schema_version: String,
    report: EvalReport,
}

/// Writes a single report wrapped as `{schema_version, report}`.
pub fn write_report_json(report: &EvalReport, path: &Path) -> Result<(), ReportError> {
    let doc = ReportDoc {
        schema_version: SCHEMA_VERSION.into(),
        report: report.clone(),
    };
    write_text(path, &serde_json::to_string_pretty(&doc).expect("report serialises"))
}

pub fn read_report_json(path: &Path) -> Result<EvalReport, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let doc: ReportDoc = serde_json::from_str(&text).map_err(|e| ReportError::Parse(e.to_string()))?;
    check_version(&doc.schema_version)?;
    Ok(doc.report)
}

pub const CSV_HEADER: [&str; 9] = [
    "backbone",
    "classifier",
    "variant",
    "accuracy",
    "precision",
    "recall",
    "f1",
    "train_time_s",
    "predict_time_s",
];

/// One row per cell: keys, aggregate fractions and mean fold timings.
/// Failed cells leave the numeric fields empty.
pub fn grid_to_csv(grid: &ExperimentGrid) -> String {
    let mut out = csv::Writer::from_writer(Vec::new());
    out.write_record(CSV_HEADER).expect("in-memory write");
    for (key, outcome) in grid.cells() {
        let mut row = vec![key.backbone.clone(), key.classifier.to_string(), key.variant.to_string()];
        match outcome {
            CellOutcome::Done(r) => {
                let a = &r.aggregate;
                row.extend(
                    [a.accuracy, a.precision, a.recall, a.f1, r.mean_train_time_s(), r.mean_predict_time_s()]
                        .iter()
                        .map(|v| v.to_string()),
                );
            }
            CellOutcome::Failed(_) => row.extend(std::iter::repeat(String::new()).take(6)),
        }
        out.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(out.into_inner().expect("in-memory flush")).expect("UTF-8")
}

pub fn write_csv(grid: &ExperimentGrid, path: &Path) -> Result<(), ReportError> {
    write_text(path, &grid_to_csv(grid))
}

/// Fraction as a percentage with two decimals, rounding half to even.
/// Always uses `.` as the decimal separator.
pub fn format_percent(fraction: f64) -> String {
    let hundredths = fraction * 10_000.0;
    // snap representation noise (e.g. 96.80000000000001) before the tie rule
    let snapped = (hundredths * 1e6).round() / 1e6;
    let n = snapped.round_ties_even() as i64;
    let sign = if n < 0 { "-" } else { "" };
    let n = n.unsigned_abs();
    format!("{sign}{}.{:02}", n / 100, n % 100)
}

const METRICS: [(&str, fn(&MetricSet) -> f64); 4] = [
    ("Accuracy", |m| m.accuracy),
    ("Precision", |m| m.precision),
    ("Recall", |m| m.recall),
    ("F1-Score", |m| m.f1),
];

fn backbone_rank(name: &str) -> (usize, String) {
    let rank = name
        .parse::<Backbone>()
        .ok()
        .and_then(|b| Backbone::ALL.iter().position(|&x| x == b))
        .unwrap_or(Backbone::ALL.len());
    (rank, name.to_string())
}

/// Pipe table for one variant: one row per backbone, one column per
/// (metric, classifier). The best value of each column is suffixed `*`;
/// equal values are all marked. Failed or missing cells show `-`.
pub fn render_table(grid: &ExperimentGrid, variant: ImageVariant) -> Result<String, ReportError> {
    let keys: Vec<&CellKey> = grid.cells.keys().filter(|k| k.variant == variant).collect();
    if keys.is_empty() {
        return Err(ReportError::EmptyGrid(variant));
    }
    let mut backbones: Vec<&str> = keys.iter().map(|k| k.backbone.as_str()).collect();
    backbones.sort_by_key(|b| backbone_rank(b));
    backbones.dedup();
    let mut classifiers: Vec<ClassifierKind> = keys.iter().map(|k| k.classifier).collect();
    classifiers.sort();
    classifiers.dedup();

    // cells[row][col] as integer hundredths of a percent, for exact tie handling
    let columns: Vec<(&str, fn(&MetricSet) -> f64, ClassifierKind)> = METRICS
        .iter()
        .flat_map(|&(name, get)| classifiers.iter().map(move |&c| (name, get, c)))
        .collect();
    let values: Vec<Vec<Option<String>>> = backbones
        .iter()
        .map(|&b| {
            columns
                .iter()
                .map(|&(_, get, c)| grid.report(b, c, variant).map(|r| format_percent(get(&r.aggregate))))
                .collect()
        })
        .collect();
    let as_num = |s: &String| s.parse::<f64>().unwrap_or(f64::NEG_INFINITY);
    let best: Vec<Option<f64>> = (0..columns.len())
        .map(|j| {
            values
                .iter()
                .filter_map(|row| row[j].as_ref().map(as_num))
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
        })
        .collect();

    let mut out = String::new();
    out.push_str("| Backbone |");
    for (name, _, c) in &columns {
        out.push_str(&format!(" {name} {} |", c.title()));
    }
    out.push_str("\n|---|");
    out.push_str(&"---:|".repeat(columns.len()));
    out.push('\n');
    for (b, row) in backbones.iter().zip(&values) {
        out.push_str(&format!("| {b} |"));
        for (j, cell) in row.iter().enumerate() {
            match cell {
                Some(s) if Some(as_num(s)) == best[j] => out.push_str(&format!(" {s}* |")),
                Some(s) => out.push_str(&format!(" {s} |")),
                None => out.push_str(" - |"),
            }
        }
        out.push('\n');
    }
    Ok(out)
}

/// Markdown document with one table per variant present in the grid.
pub fn render_markdown(grid: &ExperimentGrid) -> String {
    let mut out = String::new();
    for variant in ImageVariant::ALL {
        if let Ok(table) = render_table(grid, variant) {
            out.push_str(&format!("## {variant} images\n\n{table}\n"));
        }
    }
    let failures: Vec<String> = grid
        .cells()
        .filter_map(|(k, c)| match c {
            CellOutcome::Failed(e) => Some(format!("- {}/{}/{}: {e}", k.backbone, k.classifier, k.variant)),
            CellOutcome::Done(_) => None,
        })
        .collect();
    if !failures.is_empty() {
        out.push_str("## Failed cells\n\n");
        out.push_str(&failures.join("\n"));
        out.push('\n');
    }
    out
}

pub fn write_markdown(grid: &ExperimentGrid, path: &Path) -> Result<(), ReportError> {
    write_text(path, &render_markdown(grid))
}
