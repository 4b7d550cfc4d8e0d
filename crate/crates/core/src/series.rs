//! Univariate series, sliding-window datasets, and chronological splits.
//!
//! Values are kept in their raw units. Nothing here rescales or normalizes;
//! callers that want standardized inputs must transform the series themselves.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

/// A named, ordered sequence of finite observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    name: String,
    values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    timestamps: Option<Vec<String>>,
}

impl TimeSeries {
    pub fn new(name: impl Into<String>, values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("series value at index {i}")));
        }
        Ok(Self {
            name: name.into(),
            values,
            timestamps: None,
        })
    }

    pub fn with_timestamps(mut self, timestamps: Vec<String>) -> Result<Self> {
        if timestamps.len() != self.values.len() {
            return Err(Error::DimensionMismatch {
                expected: self.values.len(),
                found: timestamps.len(),
            });
        }
        self.timestamps = Some(timestamps);
        Ok(self)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamps(&self) -> Option<&[String]> {
        self.timestamps.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    fn slice(&self, range: std::ops::Range<usize>) -> TimeSeries {
        TimeSeries {
            name: self.name.clone(),
            values: self.values[range.clone()].to_vec(),
            timestamps: self.timestamps.as_ref().map(|t| t[range].to_vec()),
        }
    }
}

/// Selects the value column of a CSV file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ColumnRef {
    Name(String),
    Index(usize),
}

impl fmt::Display for ColumnRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ColumnRef::Name(n) => f.write_str(n),
            ColumnRef::Index(i) => write!(f, "#{i}"),
        }
    }
}

impl From<&str> for ColumnRef {
    /// Bare non-negative integers select by position, anything else by header name.
    fn from(s: &str) -> Self {
        match s.trim().parse::<usize>() {
            Ok(i) => ColumnRef::Index(i),
            Err(_) => ColumnRef::Name(s.trim().to_string()),
        }
    }
}

/// Reads one numeric column from a comma-separated file.
///
/// Rows are either `<timestamp>,<value>` or a bare `<value>`. When the file has
/// more than one column and the value column is not the first, the first column
/// is kept as the timestamp label. Reported row numbers are 1-based file lines.
pub fn load_csv(path: impl AsRef<Path>, value_column: &ColumnRef, has_header: bool) -> Result<TimeSeries> {
    let path = path.as_ref();
    if !path.is_file() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .delimiter(b',')
        .trim(csv::Trim::All)
        .flexible(false)
        .from_path(path)?;

    let col = match value_column {
        ColumnRef::Index(i) => *i,
        ColumnRef::Name(name) => {
            if !has_header {
                return Err(Error::UnknownColumn(name.clone()));
            }
            reader
                .headers()?
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| Error::UnknownColumn(name.clone()))?
        }
    };

    let mut values = Vec::new();
    let mut stamps = Vec::new();
    let mut width = None;
    for record in reader.records() {
        let record = record?;
        let row = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if width.is_none() {
            width = Some(record.len());
        }
        let cell = record
            .get(col)
            .ok_or_else(|| Error::UnknownColumn(value_column.to_string()))?;
        let value = cell
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| Error::BadCell {
                row,
                cell: cell.to_string(),
            })?;
        values.push(value);
        if col != 0 {
            stamps.push(record.get(0).unwrap_or_default().to_string());
        }
    }
    if values.len() < 2 {
        return Err(Error::TooFewObservations {
            found: values.len(),
            needed: 2,
        });
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let series = TimeSeries::new(name, values)?;
    if col != 0 && width.unwrap_or(0) > 1 {
        series.with_timestamps(stamps)
    } else {
        Ok(series)
    }
}

/// Writes `timestamp,value` rows (or `index,value` when no timestamps) with a header.
pub fn write_csv(series: &TimeSeries, path: impl AsRef<Path>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match series.timestamps() {
        Some(ts) => {
            w.write_record(["timestamp", "value"])?;
            for (t, v) in ts.iter().zip(series.values()) {
                w.write_record([t.as_str(), &v.to_string()])?;
            }
        }
        None => {
            w.write_record(["index", "value"])?;
            for (i, v) in series.values().iter().enumerate() {
                w.write_record([i.to_string(), v.to_string()])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Lag matrix and next-step targets built from a single series.
///
/// Row `i` holds `(t_i, …, t_{i+d-1})` and `targets[i] == t_{i+d}` (0-based).
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedDataset {
    window_d: usize,
    inputs: DenseMatrix,
    targets: Vec<f64>,
}

impl WindowedDataset {
    /// Builds a dataset from explicit rows; used where windows do not come from one series.
    pub fn from_parts(inputs: DenseMatrix, targets: Vec<f64>) -> Result<Self> {
        if inputs.rows() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                found: targets.len(),
            });
        }
        if inputs.rows() == 0 || inputs.cols() == 0 {
            return Err(Error::invalid("windowed dataset must be non-empty"));
        }
        if targets.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("target".into()));
        }
        Ok(Self {
            window_d: inputs.cols(),
            inputs,
            targets,
        })
    }

    pub fn window_d(&self) -> usize {
        self.window_d
    }

    pub fn inputs(&self) -> &DenseMatrix {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.inputs.row(i)
    }

    /// Recovers the source values for a dataset built by [`make_windows`]:
    /// the first row followed by every target.
    pub fn source_values(&self) -> Vec<f64> {
        let mut out = self.inputs.row(0).to_vec();
        out.extend_from_slice(&self.targets);
        out
    }

    /// SHA-256 over the window size and the IEEE-754 bits of every input and target.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.window_d as u64).to_le_bytes());
        h.update((self.len() as u64).to_le_bytes());
        for v in self.inputs.data().iter().chain(&self.targets) {
            h.update(v.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Slides a length-`d` window over the series, one target per window.
pub fn make_windows(series: &TimeSeries, d: usize) -> Result<WindowedDataset> {
    windows_from_values(series.values(), d)
}

pub(crate) fn windows_from_values(values: &[f64], d: usize) -> Result<WindowedDataset> {
    if d == 0 {
        return Err(Error::invalid("window size must be positive"));
    }
    if values.len() <= d {
        return Err(Error::TooFewObservations {
            found: values.len(),
            needed: d + 1,
        });
    }
    let n = values.len() - d;
    let mut data = Vec::with_capacity(n * d);
    for w in values.windows(d).take(n) {
        data.extend_from_slice(w);
    }
    let inputs = DenseMatrix::from_vec(n, d, data)?;
    Ok(WindowedDataset {
        window_d: d,
        inputs,
        targets: values[d..].to_vec(),
    })
}

/// Windows whose targets are exactly the points of `test`, with lags reaching
/// back into the tail of `train` for the first `d` forecasts.
pub fn make_test_windows(train: &TimeSeries, test: &TimeSeries, d: usize) -> Result<WindowedDataset> {
    if train.len() < d {
        return Err(Error::TooFewObservations {
            found: train.len(),
            needed: d,
        });
    }
    let mut joined = train.values()[train.len() - d..].to_vec();
    joined.extend_from_slice(test.values());
    windows_from_values(&joined, d)
}

/// Fraction of the series assigned to the training part.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    train_fraction: f64,
}

impl SplitSpec {
    pub fn new(train_fraction: f64) -> Result<Self> {
        if !(train_fraction > 0.0 && train_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "train fraction must lie in (0, 1), got {train_fraction}"
            )));
        }
        Ok(Self { train_fraction })
    }

    pub fn train_fraction(&self) -> f64 {
        self.train_fraction
    }

    /// Number of leading points that go to training.
    pub fn train_len(&self, n: usize) -> usize {
        // the small slack keeps 0.29 * 100 from flooring to 28
        (n as f64 * self.train_fraction + 1e-9).floor() as usize
    }
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self { train_fraction: 0.8 }
    }
}

/// Chronological split: the first `floor(n * fraction)` points train, the rest test.
pub fn split_train_test(series: &TimeSeries, spec: SplitSpec) -> Result<(TimeSeries, TimeSeries)> {
    let n = series.len();
    let k = spec.train_len(n);
    if k == 0 || k >= n {
        return Err(Error::invalid(format!(
            "split of {n} points at fraction {} leaves an empty part",
            spec.train_fraction
        )));
    }
    Ok((series.slice(0..k), series.slice(k..n)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn ts(values: &[f64]) -> TimeSeries {
        TimeSeries::new("t", values.to_vec()).unwrap()
    }

    fn write_tmp(contents: &str, name: &str) -> (tempfile::TempDir, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join(name);
        let mut f = std::fs::File::create(&path).unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        (dir, path)
    }

    #[test]
    fn csv_named_column() {
        let (_d, p) = write_tmp("date,v\n1,5.0\n2, 6.5 \n", "a.csv");
        let s = load_csv(&p, &ColumnRef::from("v"), true).unwrap();
        assert_eq!(s.values(), &[5.0, 6.5]);
        assert_eq!(s.name(), "a");
        assert_eq!(s.timestamps().unwrap(), &["1".to_string(), "2".to_string()]);
    }

    #[test]
    fn csv_single_column_without_header() {
        let (_d, p) = write_tmp("1.5\n2.5\n3.5\n", "b.csv");
        let s = load_csv(&p, &ColumnRef::Index(0), false).unwrap();
        assert_eq!(s.values(), &[1.5, 2.5, 3.5]);
        assert!(s.timestamps().is_none());
    }

    #[test]
    fn csv_bad_cell_names_row() {
        let (_d, p) = write_tmp("date,v\n1,5.0\n2,abc\n3,1\n", "c.csv");
        let err = load_csv(&p, &ColumnRef::from("v"), true).unwrap_err();
        match err {
            Error::BadCell { row, cell } => {
                assert_eq!(row, 3);
                assert_eq!(cell, "abc");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn csv_rejects_non_finite() {
        let (_d, p) = write_tmp("v\n1\nNaN\n", "n.csv");
        assert!(matches!(
            load_csv(&p, &ColumnRef::from("v"), true),
            Err(Error::BadCell { row: 3, .. })
        ));
        let (_d, p) = write_tmp("v\n1\ninf\n", "i.csv");
        assert!(matches!(
            load_csv(&p, &ColumnRef::from("v"), true),
            Err(Error::BadCell { .. })
        ));
    }

    #[test]
    fn csv_one_row_is_too_few() {
        let (_d, p) = write_tmp("date,v\n1,5.0\n", "d.csv");
        let err = load_csv(&p, &ColumnRef::from("v"), true).unwrap_err();
        assert!(matches!(err, Error::TooFewObservations { found: 1, .. }));
        assert!(err.to_string().contains("too few observations"));
    }

    #[test]
    fn csv_missing_file_and_unknown_column() {
        assert!(matches!(
            load_csv("/nonexistent/x.csv", &ColumnRef::Index(0), false),
            Err(Error::MissingFile(_))
        ));
        let (_d, p) = write_tmp("date,v\n1,5.0\n2,6\n", "e.csv");
        assert!(matches!(
            load_csv(&p, &ColumnRef::from("w"), true),
            Err(Error::UnknownColumn(_))
        ));
        assert!(matches!(
            load_csv(&p, &ColumnRef::Index(5), true),
            Err(Error::UnknownColumn(_))
        ));
    }

    #[test]
    fn csv_write_then_read() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("s.csv");
        let s = ts(&[0.1, -2.5e-7, 3.0, 1.0 / 3.0]);
        write_csv(&s, &p).unwrap();
        let back = load_csv(&p, &ColumnRef::from("value"), true).unwrap();
        assert_eq!(back.values(), s.values());
    }

    #[test]
    fn windows_basic() {
        let w = make_windows(&ts(&[1., 2., 3., 4., 5., 6.]), 3).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.row(0), &[1., 2., 3.]);
        assert_eq!(w.row(1), &[2., 3., 4.]);
        assert_eq!(w.row(2), &[3., 4., 5.]);
        assert_eq!(w.targets(), &[4., 5., 6.]);
    }

    #[test]
    fn windows_constant() {
        let w = make_windows(&ts(&[5., 5., 5., 5.]), 2).unwrap();
        assert_eq!(w.row(0), &[5., 5.]);
        assert_eq!(w.row(1), &[5., 5.]);
        assert_eq!(w.targets(), &[5., 5.]);
    }

    #[test]
    fn windows_too_short_or_zero() {
        assert!(make_windows(&ts(&[1., 2., 3.]), 3).is_err());
        assert!(make_windows(&ts(&[1., 2., 3.]), 0).is_err());
    }

    #[test]
    fn test_windows_cover_every_test_point() {
        let s = ts(&(0..10).map(f64::from).collect::<Vec<_>>());
        let (train, test) = split_train_test(&s, SplitSpec::new(0.8).unwrap()).unwrap();
        let w = make_test_windows(&train, &test, 3).unwrap();
        assert_eq!(w.targets(), test.values());
        assert_eq!(w.row(0), &[5., 6., 7.]);
    }

    #[test]
    fn split_counts() {
        let s = ts(&vec![1.0; 100]);
        let (a, b) = split_train_test(&s, SplitSpec::new(0.8).unwrap()).unwrap();
        assert_eq!((a.len(), b.len()), (80, 20));

        let s = ts(&(0..10).map(f64::from).collect::<Vec<_>>());
        let (a, b) = split_train_test(&s, SplitSpec::new(0.5).unwrap()).unwrap();
        assert_eq!(a.values(), &[0., 1., 2., 3., 4.]);
        assert_eq!(b.values(), &[5., 6., 7., 8., 9.]);
    }

    #[test]
    fn split_empty_part_is_error() {
        let s = ts(&[1., 2., 3.]);
        assert!(split_train_test(&s, SplitSpec::new(0.1).unwrap()).is_err());
        assert!(SplitSpec::new(1.0).is_err());
        assert!(SplitSpec::new(0.0).is_err());
    }

    #[test]
    fn split_keeps_timestamps_aligned() {
        let s = ts(&[1., 2., 3., 4.])
            .with_timestamps(vec!["a".into(), "b".into(), "c".into(), "d".into()])
            .unwrap();
        let (a, b) = split_train_test(&s, SplitSpec::new(0.5).unwrap()).unwrap();
        assert_eq!(a.timestamps().unwrap(), &["a".to_string(), "b".to_string()]);
        assert_eq!(b.timestamps().unwrap(), &["c".to_string(), "d".to_string()]);
    }

    #[test]
    fn rejects_non_finite_and_bad_timestamps() {
        assert!(TimeSeries::new("x", vec![1.0, f64::NAN]).is_err());
        assert!(ts(&[1.0, 2.0]).with_timestamps(vec!["a".into()]).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn windows_reconstruct_source(values in prop::collection::vec(-1e6f64..1e6, 3..80), d in 1usize..8) {
                prop_assume!(values.len() > d);
                let w = make_windows(&ts(&values), d).unwrap();
                prop_assert_eq!(w.len(), values.len() - d);
                prop_assert_eq!(w.source_values(), values.clone());
                for i in 0..w.len().saturating_sub(1) {
                    for j in 0..d - 1 {
                        prop_assert_eq!(w.row(i + 1)[j], w.row(i)[j + 1]);
                    }
                    prop_assert_eq!(w.targets()[i], w.row(i + 1)[d - 1]);
                }
            }

            #[test]
            fn split_is_partition(values in prop::collection::vec(-1e3f64..1e3, 2..200), f in 0.05f64..0.95) {
                let s = ts(&values);
                if let Ok((a, b)) = split_train_test(&s, SplitSpec::new(f).unwrap()) {
                    let mut joined = a.values().to_vec();
                    joined.extend_from_slice(b.values());
                    prop_assert_eq!(joined, values);
                }
            }
        }
    }
}
