mod args;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use log::info;

use lightcast::harness::{DataSource, ExperimentConfig, OutputFormat};
use lightcast::poly::{self, PolynomialModel};
use lightcast::rbf::{self, RbfNetwork, RbfTrainConfig};
use lightcast::series::{load_csv, make_windows, ColumnRef, SplitSpec, TimeSeries};
use lightcast::synth::SynthSpec;
use lightcast::{render_report, Error, ErrorKind, Result};

use args::{
    Cli, Command, CompareArgs, DataArgs, FitArgs, ForecastArgs, ModelType, RbfArgs, SweepArgs, SynthArgs, SynthKind,
};

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_FIT: u8 = 4;

fn exit_code(e: &Error) -> u8 {
    match e.kind() {
        ErrorKind::Config => EXIT_CONFIG,
        ErrorKind::Data => EXIT_DATA,
        ErrorKind::Fit => EXIT_FIT,
    }
}

fn main() -> ExitCode {
    let argv = match args::expand_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_CONFIG } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Sweep(a) => sweep(a),
        Command::Compare(a) => compare(a),
        Command::Fit(a) => fit(a),
        Command::Forecast(a) => forecast(a),
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => {
            fs::write(path, text)?;
            info!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn synth(a: SynthArgs) -> Result<u8> {
    let spec = match a.kind {
        SynthKind::Seasonal => SynthSpec::Seasonal {
            n: a.n,
            period: a.period,
            amplitude: a.amplitude,
            trend: a.trend,
            level: a.level,
            noise_sd: a.noise_sd,
            seed: a.seed,
        },
        SynthKind::Walk => SynthSpec::Walk {
            n: a.n,
            start: a.start,
            drift: a.drift,
            noise_sd: a.noise_sd,
            seed: a.seed,
        },
        SynthKind::Ar => SynthSpec::Ar {
            coeffs: a.coeffs,
            n: a.n,
            noise_sd: a.noise_sd,
            seed: a.seed,
        },
    };
    let series = spec.generate()?;
    lightcast::series::write_csv(&series, &a.out)?;
    info!("wrote {} points to {}", series.len(), a.out.display());
    Ok(0)
}

fn load(data: &DataArgs) -> Result<TimeSeries> {
    load_csv(&data.data, &ColumnRef::from(data.column.as_str()), !data.no_header)
}

fn source(data: &DataArgs) -> DataSource {
    DataSource::Csv {
        path: data.data.clone(),
        column: data.column.clone(),
        has_header: !data.no_header,
    }
}

fn rbf_config(r: &RbfArgs, seed: u64) -> RbfTrainConfig {
    RbfTrainConfig {
        units: r.rbf_units,
        batch_size: r.rbf_batch,
        epochs: r.rbf_epochs,
        learning_rate: r.rbf_lr,
        seed,
        target_mse: r.rbf_target_mse,
        max_units: r.rbf_max_units,
        use_bias: !r.rbf_no_bias,
        standardize: !r.rbf_raw,
        neighbor_p: r.rbf_neighbors,
        ..RbfTrainConfig::default()
    }
}

fn experiment(data: &DataArgs, window: usize, split: f64, degrees: Vec<u32>, lambda: f64) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::new(source(data), window);
    cfg.split = SplitSpec::new(split)?;
    cfg.degrees = degrees;
    cfg.ridge_lambda = lambda;
    Ok(cfg)
}

fn sweep(a: SweepArgs) -> Result<u8> {
    let cfg = experiment(&a.data, a.window, a.split, a.degrees.0, a.lambda)?;
    let report = lightcast::run_degree_sweep(&cfg)?;
    emit(&render_report(&report, a.format.into())?, a.out.as_deref())?;
    if report.all_failed() {
        eprintln!("error: every degree failed to fit");
        return Ok(EXIT_FIT);
    }
    Ok(0)
}

fn compare(a: CompareArgs) -> Result<u8> {
    let mut cfg = experiment(&a.data, a.window, a.split, a.degrees.0, a.lambda)?;
    cfg.seeds = a.seeds.0;
    cfg.alpha = a.alpha;
    cfg.rbf = rbf_config(&a.rbf, cfg.seeds.first().copied().unwrap_or(0));
    let run = lightcast::run_comparison_seeds(&cfg)?;
    emit(&render_report(&run, a.format.into())?, a.out.as_deref())?;
    Ok(0)
}

fn fit(a: FitArgs) -> Result<u8> {
    let series = load(&a.data)?;
    let train = if a.split < 1.0 {
        lightcast::split_train_test(&series, SplitSpec::new(a.split)?)?.0
    } else {
        series
    };
    let windows = make_windows(&train, a.window)?;
    let json = match a.model_type {
        ModelType::Poly => poly::fit(&windows, a.degree, a.lambda)?.to_json()?,
        ModelType::Rbf => {
            let cfg = rbf_config(&a.rbf, a.seed);
            let (net, trace) = rbf::fit(windows.inputs(), windows.targets(), &cfg)?;
            info!(
                "trained {} units over {} epochs, best training mse {:.6e}",
                trace.final_units, trace.epochs_run, trace.best_mse
            );
            net.to_json()?
        }
    };
    emit(&(json + "\n"), a.out.as_deref())?;
    Ok(0)
}

enum LoadedModel {
    Poly(PolynomialModel),
    Rbf(RbfNetwork),
}

impl LoadedModel {
    fn read(path: &PathBuf) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.clone()));
        }
        let text = fs::read_to_string(path)?;
        let doc: serde_json::Value = serde_json::from_str(&text)?;
        if doc.get("exponents").is_some() {
            Ok(LoadedModel::Poly(PolynomialModel::from_json(&text)?))
        } else if doc.get("centers").is_some() {
            Ok(LoadedModel::Rbf(RbfNetwork::from_json(&text)?))
        } else {
            Err(Error::InvalidArgument(format!(
                "{} is neither a polynomial model nor an RBF network",
                path.display()
            )))
        }
    }

    fn window_d(&self) -> usize {
        match self {
            LoadedModel::Poly(m) => m.basis().window_d(),
            LoadedModel::Rbf(n) => n.input_dim(),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            LoadedModel::Poly(m) => m.predict(x),
            LoadedModel::Rbf(n) => n.forward(x),
        }
    }
}

/// One-step forecasts for every point after the first window, plus one
/// forecast past the end of the series (with an empty `actual`).
fn forecast(a: ForecastArgs) -> Result<u8> {
    let model = LoadedModel::read(&a.model)?;
    let series = load(&a.data)?;
    let d = model.window_d();
    let values = series.values();
    if values.len() < d {
        return Err(Error::TooFewObservations {
            found: values.len(),
            needed: d,
        });
    }
    let mut out = String::from("index,actual,forecast\n");
    for i in d..=values.len() {
        let pred = model.predict(&values[i - d..i])?;
        let label = match series.timestamps() {
            Some(ts) if i < ts.len() => ts[i].clone(),
            _ => i.to_string(),
        };
        let actual = values.get(i).map(f64::to_string).unwrap_or_default();
        out.push_str(&format!("{label},{actual},{pred}\n"));
    }
    emit(&out, a.out.as_deref())?;
    Ok(0)
}

impl From<args::Format> for OutputFormat {
    fn from(f: args::Format) -> Self {
        match f {
            args::Format::Markdown => OutputFormat::Markdown,
            args::Format::Csv => OutputFormat::Csv,
            args::Format::Json => OutputFormat::Json,
        }
    }
}
