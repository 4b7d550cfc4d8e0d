//! Gaussian radial basis function network with a single linear output.
//!
//! Hidden unit `i` responds with `exp(−‖x − μᵢ‖² / 2σᵢ²)`; the output is a
//! weighted sum of the responses plus a bias. Centers come from k-means and
//! widths from nearest-neighbor center spacing. Only the output layer is
//! trained, by mini-batch RMSprop on the mean squared error, so the training
//! problem is convex.

mod kmeans;

pub use kmeans::{kmeans, MAX_LLOYD_ITERATIONS, RELATIVE_SHIFT_TOL};

use log::debug;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix, RmspropState};
use crate::series::WindowedDataset;
use kmeans::sq_dist;

pub const MODEL_SCHEMA_VERSION: u32 = 1;
pub const MIN_WIDTH: f64 = 1e-6;
/// Hidden-layer size a grown network starts from (capped by the sample count).
pub const GROW_INITIAL_UNITS: usize = 4;

/// Places `m` centers on the input rows with seeded k-means.
pub fn init_centers(inputs: &DenseMatrix, m: usize, seed: u64) -> Result<DenseMatrix> {
    kmeans(inputs, m, seed)
}

/// Root-mean-square distance of the rows from their centroid.
pub fn input_scale(inputs: &DenseMatrix) -> f64 {
    let n = inputs.rows();
    if n == 0 {
        return 0.0;
    }
    let d = inputs.cols();
    let mut mean = vec![0.0; d];
    for r in inputs.row_iter() {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n as f64);
    (inputs.row_iter().map(|r| sq_dist(r, &mean)).sum::<f64>() / n as f64).sqrt()
}

/// Width of each center = mean distance to its `neighbor_p` nearest other centers.
///
/// A lone center, or one whose neighbors all coincide with it, falls back to
/// `max(MIN_WIDTH, fallback_scale)`.
pub fn set_widths(centers: &DenseMatrix, neighbor_p: usize, fallback_scale: f64) -> Vec<f64> {
    let m = centers.rows();
    let fallback = if fallback_scale.is_finite() {
        fallback_scale.max(MIN_WIDTH)
    } else {
        MIN_WIDTH
    };
    let p = neighbor_p.max(1).min(m.saturating_sub(1));
    (0..m)
        .map(|i| {
            if p == 0 {
                return fallback;
            }
            let mut dists: Vec<f64> = (0..m)
                .filter(|&j| j != i)
                .map(|j| sq_dist(centers.row(i), centers.row(j)).sqrt())
                .collect();
            dists.sort_by(f64::total_cmp);
            let w = dists[..p].iter().sum::<f64>() / p as f64;
            if w > 0.0 && w.is_finite() {
                w
            } else {
                fallback
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RbfNetwork {
    centers: DenseMatrix,
    widths: Vec<f64>,
    out_weights: Vec<f64>,
    bias: f64,
}

impl RbfNetwork {
    pub fn new(centers: DenseMatrix, widths: Vec<f64>, out_weights: Vec<f64>, bias: f64) -> Result<Self> {
        let m = centers.rows();
        if m == 0 || centers.cols() == 0 {
            return Err(Error::invalid(
                "network needs at least one hidden unit of positive dimension",
            ));
        }
        if widths.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: widths.len(),
            });
        }
        if out_weights.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: out_weights.len(),
            });
        }
        if widths.iter().any(|w| !(*w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid("widths must be positive and finite"));
        }
        if out_weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::NonFinite("output layer parameter".into()));
        }
        Ok(Self {
            centers,
            widths,
            out_weights,
            bias,
        })
    }

    pub fn centers(&self) -> &DenseMatrix {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn out_weights(&self) -> &[f64] {
        &self.out_weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    pub fn units(&self) -> usize {
        self.centers.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.centers.cols()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn hidden_activations(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        Ok(activations_of(&self.centers, &self.widths, x))
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(dot(&self.out_weights, &self.hidden_activations(x)?) + self.bias)
    }

    /// `N × M` matrix of hidden responses, one row per input row.
    pub fn activation_matrix(&self, inputs: &DenseMatrix) -> Result<DenseMatrix> {
        if inputs.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: inputs.cols(),
            });
        }
        activation_matrix(&self.centers, &self.widths, inputs)
    }

    pub fn predict_rows(&self, inputs: &DenseMatrix) -> Result<Vec<f64>> {
        inputs.row_iter().map(|r| self.forward(r)).collect()
    }

    /// One-step-ahead forecasts over a windowed dataset.
    pub fn forecast(&self, data: &WindowedDataset) -> Result<Vec<f64>> {
        self.predict_rows(data.inputs())
    }

    pub fn mse(&self, inputs: &DenseMatrix, targets: &[f64]) -> Result<f64> {
        let preds = self.predict_rows(inputs)?;
        check_targets(inputs, targets)?;
        Ok(preds.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / targets.len() as f64)
    }

    /// Analytic gradient of the full-data MSE with respect to
    /// `(out_weights, bias)`; the bias component is last.
    pub fn output_gradient(&self, inputs: &DenseMatrix, targets: &[f64]) -> Result<Vec<f64>> {
        check_targets(inputs, targets)?;
        let acts = self.activation_matrix(inputs)?;
        let mut grad = vec![0.0; self.units() + 1];
        let scale = 2.0 / targets.len() as f64;
        for (row, &t) in acts.row_iter().zip(targets) {
            let err = dot(&self.out_weights, row) + self.bias - t;
            for (g, r) in grad.iter_mut().zip(row) {
                *g += scale * err * r;
            }
            grad[self.units()] += scale * err;
        }
        Ok(grad)
    }

    /// Copy with the output layer replaced; bias is the last entry of `params`.
    pub fn with_output_params(&self, params: &[f64]) -> Result<Self> {
        if params.len() != self.units() + 1 {
            return Err(Error::DimensionMismatch {
                expected: self.units() + 1,
                found: params.len(),
            });
        }
        RbfNetwork::new(
            self.centers.clone(),
            self.widths.clone(),
            params[..self.units()].to_vec(),
            params[self.units()],
        )
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&RbfNetworkDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<RbfNetworkDoc>(text)?.try_into()
    }
}

fn check_targets(inputs: &DenseMatrix, targets: &[f64]) -> Result<()> {
    if inputs.rows() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: inputs.rows(),
            found: targets.len(),
        });
    }
    if targets.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    Ok(())
}

fn activations_of(centers: &DenseMatrix, widths: &[f64], x: &[f64]) -> Vec<f64> {
    centers
        .row_iter()
        .zip(widths)
        .map(|(c, s)| (-sq_dist(x, c) / (2.0 * s * s)).exp())
        .collect()
}

fn activation_matrix(centers: &DenseMatrix, widths: &[f64], inputs: &DenseMatrix) -> Result<DenseMatrix> {
    let mut data = Vec::with_capacity(inputs.rows() * centers.rows());
    for r in inputs.row_iter() {
        data.extend(activations_of(centers, widths, r));
    }
    DenseMatrix::from_vec(inputs.rows(), centers.rows(), data)
}

/// Serialized form of an [`RbfNetwork`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfNetworkDoc {
    pub schema_version: u32,
    pub d: usize,
    pub centers: Vec<Vec<f64>>,
    pub widths: Vec<f64>,
    pub out_weights: Vec<f64>,
    pub bias: f64,
}

impl From<&RbfNetwork> for RbfNetworkDoc {
    fn from(net: &RbfNetwork) -> Self {
        Self {
            schema_version: MODEL_SCHEMA_VERSION,
            d: net.input_dim(),
            centers: net.centers.row_iter().map(<[f64]>::to_vec).collect(),
            widths: net.widths.clone(),
            out_weights: net.out_weights.clone(),
            bias: net.bias,
        }
    }
}

impl TryFrom<RbfNetworkDoc> for RbfNetwork {
    type Error = Error;

    fn try_from(doc: RbfNetworkDoc) -> Result<Self> {
        if doc.schema_version != MODEL_SCHEMA_VERSION {
            return Err(Error::SchemaVersion {
                found: doc.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let centers = DenseMatrix::from_rows(&doc.centers)?;
        if centers.cols() != doc.d {
            return Err(Error::DimensionMismatch {
                expected: doc.d,
                found: centers.cols(),
            });
        }
        RbfNetwork::new(centers, doc.widths, doc.out_weights, doc.bias)
    }
}

/// Hyperparameters for output-layer training and hidden-layer growth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RbfTrainConfig {
    /// Hidden units for fixed-size training.
    pub units: usize,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// When set, the hidden layer is grown until the training MSE reaches it.
    #[serde(default)]
    pub target_mse: Option<f64>,
    pub max_units: usize,
    #[serde(default = "default_true")]
    pub use_bias: bool,
    /// Train on z-scored data; the returned network is mapped back to raw units.
    #[serde(default = "default_true")]
    pub standardize: bool,
    #[serde(default = "default_neighbor_p")]
    pub neighbor_p: usize,
    #[serde(default = "default_rho")]
    pub rho: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_true() -> bool {
    true
}
fn default_neighbor_p() -> usize {
    2
}
fn default_rho() -> f64 {
    RmspropState::DEFAULT_RHO
}
fn default_epsilon() -> f64 {
    RmspropState::DEFAULT_EPSILON
}

impl Default for RbfTrainConfig {
    fn default() -> Self {
        Self {
            units: 36,
            batch_size: 109,
            epochs: 60,
            learning_rate: 0.000264,
            seed: 0,
            target_mse: None,
            max_units: 128,
            use_bias: true,
            standardize: true,
            neighbor_p: 2,
            rho: RmspropState::DEFAULT_RHO,
            epsilon: RmspropState::DEFAULT_EPSILON,
        }
    }
}

impl RbfTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch size must be at least 1"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be at least 1"));
        }
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if let Some(t) = self.target_mse {
            if !(t >= 0.0) {
                return Err(Error::invalid(format!("target MSE must be >= 0, got {t}")));
            }
        }
        RmspropState::with_hyperparameters(0, self.rho, self.epsilon)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowStop {
    TargetReached,
    MaxUnits,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    /// Full-data training MSE after every epoch (all growth rounds concatenated).
    pub epoch_mse: Vec<f64>,
    pub epochs_run: usize,
    pub final_units: usize,
    /// MSE of the returned parameters.
    pub best_mse: f64,
    /// Hidden-layer size of each growth round; a single entry for fixed-size training.
    pub units_per_round: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<GrowStop>,
}

/// Trains the output layer with centers and widths frozen.
///
/// Weights and bias start at zero. Every epoch shuffles the rows with the
/// seeded generator, applies one RMSprop step per mini-batch, then records the
/// full-data MSE. The parameters from the lowest-MSE epoch are returned.
pub fn train(
    inputs: &DenseMatrix,
    targets: &[f64],
    centers: &DenseMatrix,
    widths: &[f64],
    config: &RbfTrainConfig,
) -> Result<(RbfNetwork, TrainTrace)> {
    config.validate()?;
    check_targets(inputs, targets)?;
    let m = centers.rows();
    let template = RbfNetwork::new(centers.clone(), widths.to_vec(), vec![0.0; m], 0.0)?;
    let acts = template.activation_matrix(inputs)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let (params, best_mse, epoch_mse) = train_output_layer(&acts, targets, config, &mut rng)?;
    let net = template.with_output_params(&params)?;
    let trace = TrainTrace {
        epochs_run: epoch_mse.len(),
        epoch_mse,
        final_units: m,
        best_mse,
        units_per_round: vec![m],
        stop: None,
    };
    Ok((net, trace))
}

fn full_mse(acts: &DenseMatrix, targets: &[f64], params: &[f64]) -> f64 {
    let m = acts.cols();
    let (w, b) = params.split_at(m);
    acts.row_iter()
        .zip(targets)
        .map(|(r, t)| {
            let e = dot(w, r) + b[0] - t;
            e * e
        })
        .sum::<f64>()
        / targets.len() as f64
}

fn train_output_layer(
    acts: &DenseMatrix,
    targets: &[f64],
    config: &RbfTrainConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, f64, Vec<f64>)> {
    let n = acts.rows();
    let m = acts.cols();
    // bias is always stored last; it simply never moves when disabled
    let mut params = vec![0.0; m + 1];
    let mut grad = vec![0.0; m + 1];
    let mut state = RmspropState::with_hyperparameters(m + 1, config.rho, config.epsilon)?;
    let mut order: Vec<usize> = (0..n).collect();
    let batch = config.batch_size.min(n);

    let mut best = (f64::INFINITY, params.clone());
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 1..=config.epochs {
        order.shuffle(rng);
        for chunk in order.chunks(batch) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            let scale = 2.0 / chunk.len() as f64;
            for &i in chunk {
                let row = acts.row(i);
                let err = dot(&params[..m], row) + params[m] - targets[i];
                for (g, r) in grad[..m].iter_mut().zip(row) {
                    *g += scale * err * r;
                }
                grad[m] += scale * err;
            }
            if !config.use_bias {
                grad[m] = 0.0;
            }
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Diverged { epoch });
            }
            state.apply(&mut params, &grad, config.learning_rate)?;
        }
        let mse = full_mse(acts, targets, &params);
        if !mse.is_finite() {
            return Err(Error::Diverged { epoch });
        }
        history.push(mse);
        if mse < best.0 {
            best = (mse, params.clone());
        }
    }
    debug!(
        "output layer trained: best mse {:.6e} over {} epochs",
        best.0, config.epochs
    );
    Ok((best.1, best.0, history))
}

/// Grows the hidden layer until the training MSE reaches `config.target_mse`
/// or the network has `config.max_units` units.
///
/// Starts from `min(4, N)` k-means centers. After each training round that
/// misses the target, one unit is added at the training input with the
/// largest absolute residual (lowest index on ties).
pub fn grow_until_target(
    inputs: &DenseMatrix,
    targets: &[f64],
    config: &RbfTrainConfig,
) -> Result<(RbfNetwork, TrainTrace)> {
    config.validate()?;
    check_targets(inputs, targets)?;
    let target = config
        .target_mse
        .ok_or_else(|| Error::invalid("growth mode needs a target MSE"))?;
    if config.max_units == 0 {
        return Err(Error::invalid("max_units must be at least 1"));
    }
    let n = inputs.rows();
    let m0 = GROW_INITIAL_UNITS.min(n).min(config.max_units);
    let scale = input_scale(inputs);
    let mut center_rows: Vec<Vec<f64>> = init_centers(inputs, m0, config.seed)?
        .row_iter()
        .map(<[f64]>::to_vec)
        .collect();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut epoch_mse = Vec::new();
    let mut units_per_round = Vec::new();
    loop {
        let centers = DenseMatrix::from_rows(&center_rows)?;
        let widths = set_widths(&centers, config.neighbor_p, scale);
        let template = RbfNetwork::new(centers, widths, vec![0.0; center_rows.len()], 0.0)?;
        let acts = template.activation_matrix(inputs)?;
        let (params, best_mse, history) = train_output_layer(&acts, targets, config, &mut rng)?;
        let net = template.with_output_params(&params)?;
        epoch_mse.extend(history);
        units_per_round.push(net.units());

        let stop = if best_mse <= target {
            Some(GrowStop::TargetReached)
        } else if net.units() >= config.max_units {
            Some(GrowStop::MaxUnits)
        } else {
            None
        };
        if let Some(stop) = stop {
            debug!("growth stopped ({stop:?}) at {} units, mse {best_mse:.6e}", net.units());
            let trace = TrainTrace {
                epochs_run: epoch_mse.len(),
                epoch_mse,
                final_units: net.units(),
                best_mse,
                units_per_round,
                stop: Some(stop),
            };
            return Ok((net, trace));
        }

        let mut worst = (0, f64::NEG_INFINITY);
        for (i, (r, t)) in inputs.row_iter().zip(targets).enumerate() {
            let res = (net.forward(r)? - t).abs();
            if res > worst.1 {
                worst = (i, res);
            }
        }
        center_rows.push(inputs.row(worst.0).to_vec());
    }
}

/// Location and scale shared by the lag inputs and the targets of one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Standardizer {
    pub mean: f64,
    pub scale: f64,
}

impl Standardizer {
    /// Mean and population standard deviation of the targets; a flat series gets scale 1.
    pub fn from_targets(targets: &[f64]) -> Self {
        let n = targets.len().max(1) as f64;
        let mean = targets.iter().sum::<f64>() / n;
        let sd = (targets.iter().map(|t| (t - mean) * (t - mean)).sum::<f64>() / n).sqrt();
        let scale = if sd > 1e-12 * mean.abs().max(1.0) { sd } else { 1.0 };
        Self { mean, scale }
    }

    pub fn apply(&self, inputs: &DenseMatrix, targets: &[f64]) -> Result<(DenseMatrix, Vec<f64>)> {
        let z = |v: &f64| (v - self.mean) / self.scale;
        let x = DenseMatrix::from_vec(inputs.rows(), inputs.cols(), inputs.data().iter().map(z).collect())?;
        Ok((x, targets.iter().map(z).collect()))
    }

    /// Raw-unit network equivalent to `net` trained on standardized data.
    pub fn unscale(&self, net: &RbfNetwork) -> Result<RbfNetwork> {
        let s = self.scale;
        let centers = DenseMatrix::from_vec(
            net.centers.rows(),
            net.centers.cols(),
            net.centers.data().iter().map(|c| self.mean + s * c).collect(),
        )?;
        RbfNetwork::new(
            centers,
            net.widths.iter().map(|w| s * w).collect(),
            net.out_weights.iter().map(|w| s * w).collect(),
            s * net.bias + self.mean,
        )
    }
}

/// Fits a network per `config`: grown when `target_mse` is set, otherwise
/// `config.units` k-means centers. With `standardize`, training sees z-scored
/// data and the trace's MSE values are in standardized units.
pub fn fit(inputs: &DenseMatrix, targets: &[f64], config: &RbfTrainConfig) -> Result<(RbfNetwork, TrainTrace)> {
    if config.standardize {
        check_targets(inputs, targets)?;
        let st = Standardizer::from_targets(targets);
        let (x, t) = st.apply(inputs, targets)?;
        let raw = RbfTrainConfig {
            standardize: false,
            ..config.clone()
        };
        let (net, trace) = fit(&x, &t, &raw)?;
        return Ok((st.unscale(&net)?, trace));
    }
    if config.target_mse.is_some() {
        return grow_until_target(inputs, targets, config);
    }
    if config.units == 0 {
        return Err(Error::invalid("units must be at least 1"));
    }
    let centers = init_centers(inputs, config.units, config.seed)?;
    let widths = set_widths(&centers, config.neighbor_p, input_scale(inputs));
    train(inputs, targets, &centers, &widths, config)
}
