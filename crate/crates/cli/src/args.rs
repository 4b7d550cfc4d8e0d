use std::ffi::OsString;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lightcast::rbf::RbfTrainConfig;

#[derive(Debug, Parser)]
#[command(
    name = "lightcast",
    version,
    about = "Polynomial and RBF time-series forecasting experiments"
)]
pub struct Cli {
    /// More log output (-v info, -vv debug)
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,

    /// Flat `key = value` file supplying default flags (flags on the command line win)
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic series as CSV
    #[command(args_override_self = true)]
    Synth(SynthArgs),
    /// Polynomial degree sweep
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Polynomial vs RBF network comparison with paired significance tests
    #[command(args_override_self = true)]
    Compare(CompareArgs),
    /// Fit a single model on the training part of a series and save it as JSON
    #[command(args_override_self = true)]
    Fit(FitArgs),
    /// One-step-ahead forecasts from a saved model
    #[command(args_override_self = true)]
    Forecast(ForecastArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum SynthKind {
    Seasonal,
    Walk,
    Ar,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Format {
    Markdown,
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelType {
    Poly,
    Rbf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub kind: SynthKind,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub noise_sd: f64,
    /// Seasonal period
    #[arg(long, default_value_t = 12.0)]
    pub period: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub amplitude: f64,
    /// Linear trend per step (seasonal)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub trend: f64,
    /// Constant offset (seasonal)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub level: f64,
    /// First value (walk)
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub start: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub drift: f64,
    /// Autoregressive coefficients, comma separated (ar)
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, default_value = "0.5")]
    pub coeffs: Vec<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// Input CSV file
    #[arg(long)]
    pub data: PathBuf,
    /// Value column, by header name or 0-based index
    #[arg(long, default_value = "value")]
    pub column: String,
    /// The CSV has no header row
    #[arg(long)]
    pub no_header: bool,
}

/// Inclusive range `a..b`, comma list, or single value.
#[derive(Debug, Clone, PartialEq)]
pub struct IntList<T>(pub Vec<T>);

impl<T> FromStr for IntList<T>
where
    T: FromStr + Copy + PartialOrd + std::ops::Add<Output = T> + From<u8>,
{
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("expected `a..b`, `a,b,c` or a single integer, got `{s}`");
        if let Some((lo, hi)) = s.split_once("..") {
            let hi = hi.strip_prefix('=').unwrap_or(hi);
            let lo: T = lo.trim().parse().map_err(|_| bad())?;
            let hi: T = hi.trim().parse().map_err(|_| bad())?;
            if lo > hi {
                return Err(format!("empty range `{s}`"));
            }
            let mut out = Vec::new();
            let mut v = lo;
            while v <= hi {
                out.push(v);
                v = v + T::from(1);
            }
            return Ok(IntList(out));
        }
        s.split(',')
            .map(|p| p.trim().parse().map_err(|_| bad()))
            .collect::<Result<Vec<T>, _>>()
            .map(IntList)
    }
}

fn defaults() -> RbfTrainConfig {
    RbfTrainConfig::default()
}

#[derive(Debug, Args)]
pub struct RbfArgs {
    /// Hidden units (fixed-size training)
    #[arg(long, default_value_t = defaults().units)]
    pub rbf_units: usize,
    #[arg(long, default_value_t = defaults().learning_rate)]
    pub rbf_lr: f64,
    #[arg(long, default_value_t = defaults().epochs)]
    pub rbf_epochs: usize,
    #[arg(long, default_value_t = defaults().batch_size)]
    pub rbf_batch: usize,
    /// Grow the hidden layer until the (standardized) training MSE reaches this value
    #[arg(long)]
    pub rbf_target_mse: Option<f64>,
    /// Unit cap for growth mode
    #[arg(long, default_value_t = defaults().max_units)]
    pub rbf_max_units: usize,
    /// Nearest neighbors used to set each width
    #[arg(long, default_value_t = defaults().neighbor_p)]
    pub rbf_neighbors: usize,
    /// Train without an output bias
    #[arg(long)]
    pub rbf_no_bias: bool,
    /// Train on raw values instead of standardized ones
    #[arg(long)]
    pub rbf_raw: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    #[arg(long, default_value = "1..5")]
    pub degrees: IntList<u32>,
    /// Ridge penalty
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Training fraction of the chronological split
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    /// Candidate polynomial degrees; the lowest one is compared
    #[arg(long, default_value = "1")]
    pub degrees: IntList<u32>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[command(flatten)]
    pub rbf: RbfArgs,
    #[arg(long, default_value = "1")]
    pub seeds: IntList<u64>,
    /// Significance level
    #[arg(long, default_value_t = lightcast::stats::DEFAULT_ALPHA)]
    pub alpha: f64,
    #[arg(long, value_enum, default_value_t = Format::Markdown)]
    pub format: Format,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, value_enum, default_value_t = ModelType::Poly)]
    pub model_type: ModelType,
    #[arg(long, default_value_t = 8)]
    pub window: usize,
    #[arg(long, default_value_t = 1)]
    pub degree: u32,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    /// Fit on this leading fraction of the series (1 = all of it)
    #[arg(long, default_value_t = 0.8)]
    pub split: f64,
    #[command(flatten)]
    pub rbf: RbfArgs,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Model JSON destination (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ForecastArgs {
    /// Model JSON written by `fit`
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
    /// Forecast CSV destination (stdout when omitted)
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Turns the lines of a `key = value` file into long flags.
pub fn config_flags(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", i + 1))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: invalid key", i + 1));
        }
        let value = value.trim().trim_matches('"');
        match value {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => out.push(format!("--{key}={v}").into()),
        }
    }
    Ok(out)
}

/// Splices flags from `--config FILE` in right after the subcommand so that
/// command-line flags, which come later, override them.
pub fn expand_config(args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut path = None;
    let mut iter = args.into_iter();
    while let Some(a) = iter.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            path = Some(iter.next().ok_or("--config needs a file")?);
        } else if let Some(p) = s.strip_prefix("--config=") {
            path = Some(p.into());
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else {
        return Ok(rest);
    };
    let text =
        fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", PathBuf::from(&path).display()))?;
    let flags = config_flags(&text)?;
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.to_string_lossy().starts_with('-'))
        .map(|p| p + 2)
        .unwrap_or(rest.len());
    let mut out = rest[..sub].to_vec();
    out.extend(flags);
    out.extend_from_slice(&rest[sub..]);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges_and_lists() {
        assert_eq!("1..5".parse::<IntList<u32>>().unwrap().0, vec![1, 2, 3, 4, 5]);
        assert_eq!("2..=3".parse::<IntList<u32>>().unwrap().0, vec![2, 3]);
        assert_eq!("1,3, 7".parse::<IntList<u64>>().unwrap().0, vec![1, 3, 7]);
        assert_eq!("4".parse::<IntList<u32>>().unwrap().0, vec![4]);
        assert!("5..1".parse::<IntList<u32>>().is_err());
        assert!("x".parse::<IntList<u32>>().is_err());
    }

    #[test]
    fn config_lines() {
        let flags = config_flags("# comment\nwindow = 4\nrbf_lr=0.01\nno-header = true\nrbf_raw = false\n").unwrap();
        let flags: Vec<String> = flags.into_iter().map(|f| f.into_string().unwrap()).collect();
        assert_eq!(flags, vec!["--window=4", "--rbf-lr=0.01", "--no-header"]);
        assert!(config_flags("window 4").is_err());
    }

    #[test]
    fn command_line_overrides_config() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        fs::write(&cfg, "window = 4\nlambda = 0.5\n").unwrap();
        let argv: Vec<OsString> = [
            "lightcast",
            "-v",
            "sweep",
            "--data",
            "x.csv",
            "--window",
            "6",
            "--config",
        ]
        .iter()
        .map(OsString::from)
        .chain([cfg.into_os_string()])
        .collect();
        let cli = Cli::try_parse_from(expand_config(argv).unwrap()).unwrap();
        match cli.command {
            Command::Sweep(s) => {
                assert_eq!(s.window, 6);
                assert_eq!(s.lambda, 0.5);
            }
            other => panic!("{other:?}"),
        }
    }
}
