use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{PairedTestResult, Verdict};

/// Bumped on any breaking change to the report JSON layout.
pub const REPORT_SCHEMA_VERSION: u32 = 1;

const TABLE_HEADER: [&str; 5] = ["Model", "Execution Time (s)", "MAE", "RMSE", "CV(RMSE) (%)"];
const SWEEP_HEADER: [&str; 5] = ["Degree", "Execution Time (s)", "MAE", "RMSE", "CV(RMSE) (%)"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    Markdown,
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::invalid(format!(
                "unknown format `{other}` (markdown, csv, json)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "PC")]
    Pc,
    #[serde(rename = "RBFNN")]
    Rbfnn,
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Pc => "PC",
            ModelKind::Rbfnn => "RBFNN",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRow {
    pub model: ModelKind,
    pub exec_seconds: f64,
    pub mae: f64,
    pub rmse: f64,
    pub cv_rmse_pct: Option<f64>,
    /// Hash of the training windows this model was fit on.
    pub train_fingerprint: String,
    /// Hash of the test windows this model forecast.
    pub test_fingerprint: String,
}

/// Outcome of one paired test. Model A is the polynomial model, B the RBF network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TestOutcome {
    Completed { result: PairedTestResult, verdict: Verdict },
    Degenerate { reason: String },
}

impl TestOutcome {
    pub fn verdict(&self) -> Option<Verdict> {
        match self {
            TestOutcome::Completed { verdict, .. } => Some(*verdict),
            TestOutcome::Degenerate { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub seed: u64,
    pub seeds: Vec<u64>,
    pub window_d: usize,
    pub train_fraction: f64,
    pub pc_degree: u32,
    pub ridge_lambda: f64,
    pub alpha: f64,
    pub rbf_units: usize,
    pub rbf_epochs_run: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub dataset: String,
    /// Exactly two rows: PC first, then RBFNN.
    pub models: Vec<ModelRow>,
    pub t_test: TestOutcome,
    pub wilcoxon: TestOutcome,
    /// `a_better` means the polynomial model has significantly lower errors.
    pub verdict: Verdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict_note: Option<String>,
    pub metadata: RunMetadata,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianRow {
    pub model: ModelKind,
    pub exec_seconds: f64,
    pub mae: f64,
    pub rmse: f64,
    pub cv_rmse_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MedianSummary {
    pub seeds: Vec<u64>,
    pub models: Vec<MedianRow>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

impl MedianSummary {
    pub fn from_reports(reports: &[ComparisonReport]) -> Self {
        let models = [ModelKind::Pc, ModelKind::Rbfnn]
            .into_iter()
            .enumerate()
            .map(|(i, model)| {
                let col = |f: fn(&ModelRow) -> f64| median(reports.iter().map(|r| f(&r.models[i])).collect());
                let cvs: Option<Vec<f64>> = reports.iter().map(|r| r.models[i].cv_rmse_pct).collect();
                MedianRow {
                    model,
                    exec_seconds: col(|m| m.exec_seconds),
                    mae: col(|m| m.mae),
                    rmse: col(|m| m.rmse),
                    cv_rmse_pct: cvs.map(median),
                }
            })
            .collect();
        Self {
            seeds: reports.iter().map(|r| r.metadata.seed).collect(),
            models,
        }
    }
}

/// Per-seed comparison reports with medians across seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRun {
    pub schema_version: u32,
    pub reports: Vec<ComparisonReport>,
    pub summary: MedianSummary,
}

impl ComparisonRun {
    /// Zeroes every wall-clock field so runs can be compared for equality.
    pub fn strip_timings(&mut self) {
        for r in &mut self.reports {
            r.models.iter_mut().for_each(|m| m.exec_seconds = 0.0);
        }
        self.summary.models.iter_mut().for_each(|m| m.exec_seconds = 0.0);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SweepOutcome {
    Ok {
        exec_seconds: f64,
        mae: f64,
        rmse: f64,
        cv_rmse_pct: Option<f64>,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub degree: u32,
    #[serde(flatten)]
    pub outcome: SweepOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub schema_version: u32,
    pub dataset: String,
    pub window_d: usize,
    pub train_fraction: f64,
    pub ridge_lambda: f64,
    pub n_train: usize,
    pub n_test: usize,
    pub config_hash: String,
    pub train_fingerprint: String,
    pub test_fingerprint: String,
    pub rows: Vec<SweepRow>,
}

impl SweepReport {
    pub fn all_failed(&self) -> bool {
        self.rows
            .iter()
            .all(|r| matches!(r.outcome, SweepOutcome::Failed { .. }))
    }
}

fn cv_cell(cv: Option<f64>) -> String {
    cv.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"))
}

/// Cells of one metric table row: label, seconds (2 dp), MAE, RMSE, CV (4 dp).
pub fn metric_cells(label: &str, seconds: f64, mae: f64, rmse: f64, cv: Option<f64>) -> [String; 5] {
    [
        label.to_string(),
        format!("{seconds:.2}"),
        format!("{mae:.4}"),
        format!("{rmse:.4}"),
        cv_cell(cv),
    ]
}

fn md_line(cells: &[impl AsRef<str>]) -> String {
    let mut s = String::from("|");
    for c in cells {
        s.push(' ');
        s.push_str(c.as_ref());
        s.push_str(" |");
    }
    s.push('\n');
    s
}

fn md_table(header: &[&str], rows: &[[String; 5]]) -> String {
    let mut out = md_line(header);
    out.push_str(&md_line(&vec!["---"; header.len()]));
    for r in rows {
        out.push_str(&md_line(r));
    }
    out
}

fn csv_table(header: &[&str], rows: &[[String; 5]]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn model_cells(m: &ModelRow) -> [String; 5] {
    metric_cells(m.model.label(), m.exec_seconds, m.mae, m.rmse, m.cv_rmse_pct)
}

fn test_line(name: &str, t: &TestOutcome) -> String {
    match t {
        TestOutcome::Completed { result, verdict } => format!(
            "- {name}: statistic = {:.4}, p = {:.4e}, n = {}, verdict = {verdict}\n",
            result.statistic, result.p_value, result.n_effective
        ),
        TestOutcome::Degenerate { reason } => format!("- {name}: degenerate ({reason})\n"),
    }
}

/// Anything that can be rendered as a markdown table, CSV or JSON.
pub trait Render: Serialize {
    fn markdown(&self) -> String;
    fn csv(&self) -> Result<String>;
}

impl Render for ComparisonReport {
    fn markdown(&self) -> String {
        let rows: Vec<_> = self.models.iter().map(model_cells).collect();
        let mut out = md_table(&TABLE_HEADER, &rows);
        out.push('\n');
        out.push_str(&test_line("paired t-test", &self.t_test));
        out.push_str(&test_line("Wilcoxon signed-rank", &self.wilcoxon));
        let _ = write!(out, "- verdict (A = PC, B = RBFNN): {}", self.verdict);
        if let Some(note) = &self.verdict_note {
            let _ = write!(out, " ({note})");
        }
        out.push('\n');
        out
    }

    fn csv(&self) -> Result<String> {
        let rows: Vec<_> = self.models.iter().map(model_cells).collect();
        csv_table(&TABLE_HEADER, &rows)
    }
}

impl Render for ComparisonRun {
    fn markdown(&self) -> String {
        let mut out = String::new();
        for r in &self.reports {
            let _ = writeln!(out, "### {} (seed {})\n", r.dataset, r.metadata.seed);
            out.push_str(&r.markdown());
            out.push('\n');
        }
        if self.reports.len() > 1 {
            let _ = writeln!(out, "### Median over {} seeds\n", self.reports.len());
            let rows: Vec<_> = self
                .summary
                .models
                .iter()
                .map(|m| metric_cells(m.model.label(), m.exec_seconds, m.mae, m.rmse, m.cv_rmse_pct))
                .collect();
            out.push_str(&md_table(&TABLE_HEADER, &rows));
        }
        out
    }

    /// A single seed renders its own rows; several seeds render the medians.
    fn csv(&self) -> Result<String> {
        match self.reports.as_slice() {
            [only] => only.csv(),
            _ => {
                let rows: Vec<_> = self
                    .summary
                    .models
                    .iter()
                    .map(|m| metric_cells(m.model.label(), m.exec_seconds, m.mae, m.rmse, m.cv_rmse_pct))
                    .collect();
                csv_table(&TABLE_HEADER, &rows)
            }
        }
    }
}

fn sweep_cells(row: &SweepRow) -> [String; 5] {
    match &row.outcome {
        SweepOutcome::Ok {
            exec_seconds,
            mae,
            rmse,
            cv_rmse_pct,
        } => metric_cells(&row.degree.to_string(), *exec_seconds, *mae, *rmse, *cv_rmse_pct),
        SweepOutcome::Failed { error } => [
            row.degree.to_string(),
            "failed".into(),
            "-".into(),
            "-".into(),
            error.replace('|', "/"),
        ],
    }
}

impl Render for SweepReport {
    fn markdown(&self) -> String {
        let rows: Vec<_> = self.rows.iter().map(sweep_cells).collect();
        md_table(&SWEEP_HEADER, &rows)
    }

    fn csv(&self) -> Result<String> {
        let rows: Vec<_> = self.rows.iter().map(sweep_cells).collect();
        csv_table(&SWEEP_HEADER, &rows)
    }
}

pub fn render_report<R: Render>(report: &R, format: OutputFormat) -> Result<String> {
    match format {
        OutputFormat::Markdown => Ok(report.markdown()),
        OutputFormat::Csv => report.csv(),
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
    }
}
