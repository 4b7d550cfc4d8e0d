//! Experiment orchestration: polynomial degree sweeps and polynomial-vs-RBF
//! comparisons with paired significance tests.

mod report;

pub use report::{
    metric_cells, render_report, ComparisonReport, ComparisonRun, MedianRow, MedianSummary, ModelKind, ModelRow,
    OutputFormat, Render, RunMetadata, SweepOutcome, SweepReport, SweepRow, TestOutcome, REPORT_SCHEMA_VERSION,
};

use std::path::PathBuf;

use log::{info, warn};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{absolute_errors, timed, MetricReport};
use crate::poly;
use crate::rbf::{self, RbfTrainConfig};
use crate::series::{
    load_csv, make_test_windows, make_windows, split_train_test, ColumnRef, SplitSpec, TimeSeries, WindowedDataset,
};
use crate::stats::{paired_t_test, significance_verdict, wilcoxon_signed_rank, Verdict, DEFAULT_ALPHA};
use crate::synth::SynthSpec;

/// JSON schema for [`ComparisonRun`] documents.
pub const COMPARISON_SCHEMA: &str = include_str!("../../schemas/comparison_run.schema.json");
/// JSON schema for [`SweepReport`] documents.
pub const SWEEP_SCHEMA: &str = include_str!("../../schemas/sweep_report.schema.json");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DataSource {
    Csv {
        path: PathBuf,
        column: String,
        #[serde(default = "default_true")]
        has_header: bool,
    },
    Synthetic {
        spec: SynthSpec,
    },
}

fn default_true() -> bool {
    true
}

impl DataSource {
    pub fn load(&self) -> Result<TimeSeries> {
        match self {
            DataSource::Csv {
                path,
                column,
                has_header,
            } => load_csv(path, &ColumnRef::from(column.as_str()), *has_header),
            DataSource::Synthetic { spec } => spec.generate(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub source: DataSource,
    pub window_d: usize,
    #[serde(default)]
    pub split: SplitSpec,
    #[serde(default = "default_degrees")]
    pub degrees: Vec<u32>,
    #[serde(default)]
    pub ridge_lambda: f64,
    #[serde(default)]
    pub rbf: RbfTrainConfig,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
}

fn default_degrees() -> Vec<u32> {
    (1..=5).collect()
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

impl ExperimentConfig {
    /// Config with the default split, degrees 1..=5, no ridge, seed 0 and α = 0.05.
    pub fn new(source: DataSource, window_d: usize) -> Self {
        Self {
            source,
            window_d,
            split: SplitSpec::default(),
            degrees: default_degrees(),
            ridge_lambda: 0.0,
            rbf: RbfTrainConfig::default(),
            seeds: default_seeds(),
            alpha: DEFAULT_ALPHA,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_d == 0 {
            return Err(Error::invalid("window size must be positive"));
        }
        SplitSpec::new(self.split.train_fraction())?;
        if self.degrees.is_empty() || self.degrees.contains(&0) {
            return Err(Error::invalid("degrees must be a non-empty list of positive integers"));
        }
        if !(self.ridge_lambda >= 0.0) || !self.ridge_lambda.is_finite() {
            return Err(Error::invalid(format!(
                "ridge lambda must be >= 0, got {}",
                self.ridge_lambda
            )));
        }
        if self.seeds.is_empty() {
            return Err(Error::invalid("at least one seed is required"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        self.rbf.validate()
    }

    /// SHA-256 of the config's canonical JSON.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex(&Sha256::digest(text.as_bytes()))
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Train and test windows shared by every model in an experiment.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub label: String,
    pub train: WindowedDataset,
    pub test: WindowedDataset,
}

pub fn prepare_data(config: &ExperimentConfig) -> Result<PreparedData> {
    let series = config.source.load().map_err(|e| e.in_stage("loading data"))?;
    let (train_s, test_s) = split_train_test(&series, config.split).map_err(|e| e.in_stage("splitting data"))?;
    let train = make_windows(&train_s, config.window_d).map_err(|e| e.in_stage("windowing training data"))?;
    let test = make_test_windows(&train_s, &test_s, config.window_d).map_err(|e| e.in_stage("windowing test data"))?;
    Ok(PreparedData {
        label: series.name().to_string(),
        train,
        test,
    })
}

/// Fits one polynomial model per degree and scores it on the test windows.
///
/// Data problems abort the sweep; a failed fit only marks its own row.
pub fn run_degree_sweep(config: &ExperimentConfig) -> Result<SweepReport> {
    config.validate()?;
    let data = prepare_data(config)?;
    let mut degrees = config.degrees.clone();
    degrees.sort_unstable();
    degrees.dedup();

    let rows = degrees
        .into_iter()
        .map(|degree| {
            let run = timed(|| {
                let model = poly::fit(&data.train, degree, config.ridge_lambda)?;
                poly::rolling_forecast(&model, &data.test)
            });
            let outcome = match run.and_then(|t| {
                MetricReport::compute(data.test.targets(), &t.value)
                    .map(|m| (m, t.seconds))
                    .map_err(|error| crate::metrics::TimedError {
                        error,
                        seconds: t.seconds,
                    })
            }) {
                Ok((m, seconds)) => SweepOutcome::Ok {
                    exec_seconds: seconds,
                    mae: m.mae,
                    rmse: m.rmse,
                    cv_rmse_pct: m.cv_rmse_pct,
                },
                Err(e) => {
                    warn!("degree {degree} failed: {}", e.error);
                    SweepOutcome::Failed {
                        error: e.error.to_string(),
                    }
                }
            };
            SweepRow { degree, outcome }
        })
        .collect();

    Ok(SweepReport {
        schema_version: REPORT_SCHEMA_VERSION,
        dataset: data.label.clone(),
        window_d: config.window_d,
        train_fraction: config.split.train_fraction(),
        ridge_lambda: config.ridge_lambda,
        n_train: data.train.len(),
        n_test: data.test.len(),
        config_hash: config.hash(),
        train_fingerprint: data.train.fingerprint(),
        test_fingerprint: data.test.fingerprint(),
        rows,
    })
}

fn test_outcome(result: Result<crate::stats::PairedTestResult>, alpha: f64) -> Result<TestOutcome> {
    match result {
        Ok(result) => Ok(TestOutcome::Completed {
            verdict: significance_verdict(&result, alpha),
            result,
        }),
        Err(Error::DegenerateSample(reason)) => Ok(TestOutcome::Degenerate { reason }),
        Err(e) => Err(e),
    }
}

/// Combined verdict: both tests must agree, and a degenerate test forces no difference.
fn overall_verdict(t: &TestOutcome, w: &TestOutcome) -> (Verdict, Option<String>) {
    match (t.verdict(), w.verdict()) {
        (Some(a), Some(b)) if a == b => (a, None),
        (Some(_), Some(_)) => (
            Verdict::NoSignificantDifference,
            Some("tests disagree; treated as no significant difference".into()),
        ),
        _ => (
            Verdict::NoSignificantDifference,
            Some("degenerate sample; significance tests not applicable".into()),
        ),
    }
}

fn comparison_for_seed(config: &ExperimentConfig, data: &PreparedData, seed: u64) -> Result<ComparisonReport> {
    let degree = *config.degrees.iter().min().expect("validated non-empty");
    let truth = data.test.targets();

    let train_fp = data.train.fingerprint();
    let test_fp = data.test.fingerprint();

    let pc = timed(|| {
        let model = poly::fit(&data.train, degree, config.ridge_lambda)?;
        poly::rolling_forecast(&model, &data.test)
    })
    .map_err(|e| e.error.in_stage("PC fit"))?;

    let rbf_config = RbfTrainConfig {
        seed,
        ..config.rbf.clone()
    };
    let rbf_run = timed(|| {
        let (net, trace) = rbf::fit(data.train.inputs(), data.train.targets(), &rbf_config)?;
        let preds = net.forecast(&data.test)?;
        Ok::<_, Error>((preds, trace))
    })
    .map_err(|e| e.error.in_stage("RBFNN fit"))?;
    let (rbf_preds, trace) = &rbf_run.value;

    let pc_metrics = MetricReport::compute(truth, &pc.value).map_err(|e| e.in_stage("PC evaluation"))?;
    let rbf_metrics = MetricReport::compute(truth, rbf_preds).map_err(|e| e.in_stage("RBFNN evaluation"))?;
    let pc_err = absolute_errors(truth, &pc.value)?;
    let rbf_err = absolute_errors(truth, rbf_preds)?;

    let t_test = test_outcome(paired_t_test(&pc_err, &rbf_err), config.alpha)?;
    let wilcoxon = test_outcome(wilcoxon_signed_rank(&pc_err, &rbf_err), config.alpha)?;
    let (verdict, verdict_note) = overall_verdict(&t_test, &wilcoxon);

    let row = |model, seconds, m: MetricReport| ModelRow {
        model,
        exec_seconds: seconds,
        mae: m.mae,
        rmse: m.rmse,
        cv_rmse_pct: m.cv_rmse_pct,
        train_fingerprint: train_fp.clone(),
        test_fingerprint: test_fp.clone(),
    };
    Ok(ComparisonReport {
        dataset: data.label.clone(),
        models: vec![
            row(ModelKind::Pc, pc.seconds, pc_metrics),
            row(ModelKind::Rbfnn, rbf_run.seconds, rbf_metrics),
        ],
        t_test,
        wilcoxon,
        verdict,
        verdict_note,
        metadata: RunMetadata {
            seed,
            seeds: config.seeds.clone(),
            window_d: config.window_d,
            train_fraction: config.split.train_fraction(),
            pc_degree: degree,
            ridge_lambda: config.ridge_lambda,
            alpha: config.alpha,
            rbf_units: trace.final_units,
            rbf_epochs_run: trace.epochs_run,
            n_train: data.train.len(),
            n_test: data.test.len(),
            config_hash: config.hash(),
        },
    })
}

/// Compares the lowest configured polynomial degree against the RBF network
/// for the first seed.
pub fn run_comparison(config: &ExperimentConfig) -> Result<ComparisonReport> {
    config.validate()?;
    let data = prepare_data(config)?;
    comparison_for_seed(config, &data, config.seeds[0])
}

/// One comparison per seed on identical windows, plus medians across seeds.
pub fn run_comparison_seeds(config: &ExperimentConfig) -> Result<ComparisonRun> {
    config.validate()?;
    let data = prepare_data(config)?;
    let reports = config
        .seeds
        .iter()
        .map(|&seed| {
            let r = comparison_for_seed(config, &data, seed)?;
            info!("seed {seed}: verdict {}", r.verdict);
            Ok(r)
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = MedianSummary::from_reports(&reports);
    Ok(ComparisonRun {
        schema_version: REPORT_SCHEMA_VERSION,
        reports,
        summary,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seasonal(seed: u64) -> DataSource {
        DataSource::Synthetic {
            spec: SynthSpec::Seasonal {
                n: 240,
                period: 12.0,
                amplitude: 10.0,
                trend: 0.0,
                level: 50.0,
                noise_sd: 1.0,
                seed,
            },
        }
    }

    fn quick_rbf() -> RbfTrainConfig {
        RbfTrainConfig {
            units: 12,
            batch_size: 16,
            epochs: 40,
            learning_rate: 0.01,
            ..Default::default()
        }
    }

    #[test]
    fn linear_series_sweep_is_exact() {
        let values: Vec<f64> = (0..60).map(|i| 3.0 + 0.5 * i as f64).collect();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("line.csv");
        crate::series::write_csv(&TimeSeries::new("line", values).unwrap(), &path).unwrap();
        let mut cfg = ExperimentConfig::new(
            DataSource::Csv {
                path,
                column: "value".into(),
                has_header: true,
            },
            2,
        );
        cfg.degrees = vec![1];
        let report = run_degree_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 1);
        match report.rows[0].outcome {
            SweepOutcome::Ok { mae, .. } => assert!(mae < 1e-6, "{mae}"),
            ref other => panic!("{other:?}"),
        }
    }

    #[test]
    fn oversized_basis_fails_only_its_row() {
        let mut cfg = ExperimentConfig::new(seasonal(1), 30);
        cfg.degrees = vec![1, 6];
        let report = run_degree_sweep(&cfg).unwrap();
        assert_eq!(report.rows.len(), 2);
        assert!(matches!(report.rows[0].outcome, SweepOutcome::Ok { .. }));
        assert!(matches!(report.rows[1].outcome, SweepOutcome::Failed { .. }));
    }

    #[test]
    fn comparison_structure_and_determinism() {
        let mut cfg = ExperimentConfig::new(seasonal(3), 6);
        cfg.rbf = quick_rbf();
        cfg.seeds = vec![5, 6];
        let run = run_comparison_seeds(&cfg).unwrap();
        assert_eq!(run.reports.len(), 2);
        for r in &run.reports {
            assert_eq!(r.models.len(), 2);
            assert_eq!(r.models[0].train_fingerprint, r.models[1].train_fingerprint);
            assert_eq!(r.models[0].test_fingerprint, r.models[1].test_fingerprint);
            assert_eq!(r.metadata.pc_degree, 1);
        }
        let again = run_comparison_seeds(&cfg).unwrap();
        let strip = |run: &ComparisonRun| {
            let mut run = run.clone();
            run.strip_timings();
            serde_json::to_string(&run).unwrap()
        };
        assert_eq!(strip(&run), strip(&again));
        let first = run_comparison(&cfg).unwrap();
        assert_eq!(first.metadata.seed, 5);
    }

    #[test]
    fn constant_series_is_degenerate() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("flat.csv");
        crate::series::write_csv(&TimeSeries::new("flat", vec![7.0; 80]).unwrap(), &path).unwrap();
        let mut cfg = ExperimentConfig::new(
            DataSource::Csv {
                path,
                column: "value".into(),
                has_header: true,
            },
            3,
        );
        cfg.rbf = quick_rbf();
        let report = run_comparison(&cfg).unwrap();
        for m in &report.models {
            assert!(m.mae < 1e-6, "{m:?}");
        }
        assert_eq!(report.verdict, Verdict::NoSignificantDifference);
        assert!(report.verdict_note.as_deref().unwrap().contains("degenerate"));
    }

    #[test]
    fn fit_failure_names_the_stage() {
        let mut cfg = ExperimentConfig::new(seasonal(2), 4);
        cfg.rbf.units = 10_000;
        let err = run_comparison(&cfg).unwrap_err();
        assert!(err.to_string().starts_with("RBFNN fit failed"), "{err}");
    }

    #[test]
    fn config_validation() {
        let mut cfg = ExperimentConfig::new(seasonal(0), 4);
        cfg.degrees.clear();
        assert!(cfg.validate().is_err());
        let mut cfg = ExperimentConfig::new(seasonal(0), 4);
        cfg.seeds.clear();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::new(seasonal(0), 0);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn config_roundtrips_through_json() {
        let cfg = ExperimentConfig::new(seasonal(9), 8);
        let text = serde_json::to_string(&cfg).unwrap();
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }
}
