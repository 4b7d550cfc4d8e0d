//! Lightweight univariate time-series forecasting.
//!
//! Two model families share one data pipeline: a polynomial regression over
//! all monomials of a lag window, fit in closed form, and a Gaussian RBF
//! network whose output layer is trained with RMSprop. The [`harness`] module
//! runs degree sweeps and paired model comparisons on top of them.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod poly;
pub mod rbf;
pub mod series;
pub mod stats;
pub mod synth;

pub use error::{Error, ErrorKind, Result};
pub use harness::{
    render_report, run_comparison, run_comparison_seeds, run_degree_sweep, ComparisonReport, ComparisonRun, DataSource,
    ExperimentConfig, OutputFormat, SweepReport, SweepRow,
};
pub use linalg::{solve_spd, DenseMatrix, RmspropState};
pub use metrics::{cv_rmse, mae, rmse, timed, MetricReport};
pub use poly::{enumerate_monomials, MonomialBasis, PolynomialModel};
pub use rbf::{RbfNetwork, RbfTrainConfig, TrainTrace};
pub use series::{load_csv, make_windows, split_train_test, ColumnRef, SplitSpec, TimeSeries, WindowedDataset};
pub use stats::{paired_t_test, significance_verdict, wilcoxon_signed_rank, PairedTestResult, Verdict};
pub use synth::{synth_ar, synth_random_walk, synth_seasonal, SynthSpec};
