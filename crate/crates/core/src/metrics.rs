//! Forecast accuracy metrics and wall-clock timing.

use std::time::Instant;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Means closer to zero than this make the coefficient of variation undefined.
pub const CV_MEAN_EPS: f64 = 1e-12;

fn check_pair(obs: &[f64], pred: &[f64]) -> Result<()> {
    if obs.len() != pred.len() {
        return Err(Error::DimensionMismatch {
            expected: obs.len(),
            found: pred.len(),
        });
    }
    if obs.is_empty() {
        return Err(Error::invalid("metrics need at least one observation"));
    }
    Ok(())
}

/// Mean absolute error.
pub fn mae(obs: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(obs, pred)?;
    Ok(obs.iter().zip(pred).map(|(o, p)| (o - p).abs()).sum::<f64>() / obs.len() as f64)
}

/// Root mean squared error.
pub fn rmse(obs: &[f64], pred: &[f64]) -> Result<f64> {
    check_pair(obs, pred)?;
    let mse = obs.iter().zip(pred).map(|(o, p)| (o - p) * (o - p)).sum::<f64>() / obs.len() as f64;
    Ok(mse.sqrt())
}

/// RMSE divided by the mean observation, in percent.
///
/// Errors when the mean is within [`CV_MEAN_EPS`] of zero. A negative mean
/// yields a negative value and a warning.
pub fn cv_rmse(obs: &[f64], pred: &[f64]) -> Result<f64> {
    let r = rmse(obs, pred)?;
    let mean = obs.iter().sum::<f64>() / obs.len() as f64;
    if mean.abs() <= CV_MEAN_EPS {
        return Err(Error::UndefinedMetric(format!(
            "CV(RMSE) needs a non-zero mean observation, got {mean:e}"
        )));
    }
    if mean < 0.0 {
        warn!("mean observation {mean} is negative; CV(RMSE) will be negative");
    }
    Ok(100.0 * r / mean)
}

/// Per-point absolute errors `|obs_i − pred_i|`.
pub fn absolute_errors(obs: &[f64], pred: &[f64]) -> Result<Vec<f64>> {
    check_pair(obs, pred)?;
    Ok(obs.iter().zip(pred).map(|(o, p)| (o - p).abs()).collect())
}

/// Error summary for one model on one evaluation set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub mae: f64,
    pub rmse: f64,
    /// `None` when the mean observation is (numerically) zero.
    pub cv_rmse_pct: Option<f64>,
    pub n: usize,
}

impl MetricReport {
    pub fn compute(obs: &[f64], pred: &[f64]) -> Result<Self> {
        let mae = mae(obs, pred)?;
        let rmse = rmse(obs, pred)?;
        let cv_rmse_pct = match cv_rmse(obs, pred) {
            Ok(v) => Some(v),
            Err(Error::UndefinedMetric(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            mae,
            rmse,
            cv_rmse_pct,
            n: obs.len(),
        })
    }
}

/// A value together with the wall-clock seconds it took to produce.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedResult<T> {
    pub value: T,
    pub seconds: f64,
}

/// Runs `action` and measures it with the monotonic clock.
pub fn timed<T, E, F>(action: F) -> std::result::Result<TimedResult<T>, TimedError<E>>
where
    F: FnOnce() -> std::result::Result<T, E>,
{
    let start = Instant::now();
    let out = action();
    let seconds = start.elapsed().as_secs_f64();
    match out {
        Ok(value) => Ok(TimedResult { value, seconds }),
        Err(error) => Err(TimedError { error, seconds }),
    }
}

/// Failure of a timed action, with the time spent before it failed.
#[derive(Debug)]
pub struct TimedError<E> {
    pub error: E,
    pub seconds: f64,
}
