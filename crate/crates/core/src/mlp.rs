//! Fully connected tansig network trained by full-batch backpropagation with
//! momentum.
//!
//! Every computed layer applies `tansig(z) = tanh(z)`. The loss is
//! `E = ½ Σ ‖t − o‖²` summed over the batch; weights change once per epoch by
//! `Δw_t = m_c Δw_{t−1} + (1 − m_c) η (−∇E)`, so `m_c = 0` is plain gradient
//! descent and `m_c = 1` repeats the last change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_LEARNING_RATE: f64 = 0.02;
pub const DEFAULT_MOMENTUM: f64 = 0.9;
pub const DEFAULT_MAX_EPOCHS: usize = 5000;
pub const DEFAULT_TARGET_MSE: f64 = 1e-3;
pub const DEFAULT_HIDDEN: [usize; 3] = [100, 60, 30];

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("network needs at least 2 layers, got {0}")]
    TooFewLayers(usize),
    #[error("layer {0} has zero units")]
    EmptyLayer(usize),
    #[error("input has {found} values, network expects {expected}")]
    InputLength { expected: usize, found: usize },
    #[error("target has {found} values, network produces {expected}")]
    TargetLength { expected: usize, found: usize },
    #[error("empty training batch")]
    EmptyBatch,
    #[error("{inputs} inputs but {targets} targets")]
    BatchMismatch { inputs: usize, targets: usize },
    #[error("invalid training config `{field}`: {reason}")]
    BadConfig { field: &'static str, reason: String },
    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Diverged { epoch: usize },
    #[error("inconsistent network: {0}")]
    Inconsistent(String),
}

#[inline]
pub fn tansig(x: f64) -> f64 {
    x.tanh()
}

/// Weights (row-major `outputs x inputs`) and biases of one layer. Also used
/// for gradients and weight deltas, which share the shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    fn zeros(outputs: usize, inputs: usize) -> Self {
        Self {
            weights: vec![0.0; outputs * inputs],
            biases: vec![0.0; outputs],
        }
    }

    fn add_assign(&mut self, other: &LayerParams) {
        for (a, b) in self.weights.iter_mut().zip(&other.weights) {
            *a += b;
        }
        for (a, b) in self.biases.iter_mut().zip(&other.biases) {
            *a += b;
        }
    }
}

/// Per-layer values with the same shapes as a network's parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradient(pub Vec<LayerParams>);

impl Gradient {
    pub fn zeros_like(net: &MlpNetwork) -> Self {
        Gradient(
            net.layer_sizes
                .windows(2)
                .map(|w| LayerParams::zeros(w[1], w[0]))
                .collect(),
        )
    }

    pub fn add_assign(&mut self, other: &Gradient) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    /// Every weight and bias, layer by layer, weights first.
    pub fn flatten(&self) -> Vec<f64> {
        self.0
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    layers: Vec<LayerParams>,
}

/// Activations of every layer, input first.
#[derive(Debug, Clone)]
pub struct Forward {
    pub activations: Vec<Vec<f64>>,
}

impl Forward {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("at least one layer")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Accept(usize),
    Reject,
}

impl MlpNetwork {
    /// Weights uniform in `±1/√fan_in` from a seeded generator, biases zero.
    pub fn init(layer_sizes: &[usize], seed: u64) -> Result<Self, MlpError> {
        check_sizes(layer_sizes)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = layer_sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = 1.0 / (fan_in as f64).sqrt();
                LayerParams {
                    weights: (0..fan_in * fan_out)
                        .map(|_| rng.random_range(-bound..=bound))
                        .collect(),
                    biases: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    /// Builds a network from explicit parameters, checking shapes and
    /// finiteness.
    pub fn from_params(layer_sizes: &[usize], layers: Vec<LayerParams>) -> Result<Self, MlpError> {
        check_sizes(layer_sizes)?;
        if layers.len() != layer_sizes.len() - 1 {
            return Err(MlpError::Inconsistent(format!(
                "{} parameter layers for {} layer sizes",
                layers.len(),
                layer_sizes.len()
            )));
        }
        for (l, (p, w)) in layers.iter().zip(layer_sizes.windows(2)).enumerate() {
            if p.weights.len() != w[0] * w[1] || p.biases.len() != w[1] {
                return Err(MlpError::Inconsistent(format!("layer {} has wrong shape", l + 1)));
            }
            if p.weights.iter().chain(&p.biases).any(|x| !x.is_finite()) {
                return Err(MlpError::Inconsistent(format!(
                    "layer {} has non-finite parameters",
                    l + 1
                )));
            }
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            layers,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub fn input_len(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_len(&self) -> usize {
        *self.layer_sizes.last().expect("validated")
    }

    pub fn forward(&self, input: &[f64]) -> Result<Forward, MlpError> {
        if input.len() != self.input_len() {
            return Err(MlpError::InputLength {
                expected: self.input_len(),
                found: input.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layer_sizes.len());
        activations.push(input.to_vec());
        for (layer, w) in self.layers.iter().zip(self.layer_sizes.windows(2)) {
            let prev = activations.last().expect("nonempty");
            let (n_in, n_out) = (w[0], w[1]);
            let next: Vec<f64> = (0..n_out)
                .map(|i| {
                    let row = &layer.weights[i * n_in..(i + 1) * n_in];
                    let z = layer.biases[i] + row.iter().zip(prev).map(|(a, b)| a * b).sum::<f64>();
                    tansig(z)
                })
                .collect();
            activations.push(next);
        }
        Ok(Forward { activations })
    }

    /// Gradient of `½‖t − o‖²` for one example, and that loss.
    fn example_gradient(&self, input: &[f64], target: &[f64]) -> Result<(Gradient, f64), MlpError> {
        if target.len() != self.output_len() {
            return Err(MlpError::TargetLength {
                expected: self.output_len(),
                found: target.len(),
            });
        }
        let fwd = self.forward(input)?;
        let out = fwd.output();
        let mut loss = 0.0;
        // dE/dz at the output: (o − t)(1 − o²)
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(&o, &t)| {
                loss += (t - o) * (t - o);
                (o - t) * (1.0 - o * o)
            })
            .collect();
        let mut grads = vec![LayerParams::zeros(0, 0); self.layers.len()];
        for l in (0..self.layers.len()).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let a_prev = &fwd.activations[l];
            let mut g = LayerParams::zeros(n_out, n_in);
            for ((row, b), &d) in g.weights.chunks_mut(n_in).zip(&mut g.biases).zip(&delta) {
                for (gw, &a) in row.iter_mut().zip(a_prev) {
                    *gw = d * a;
                }
                *b = d;
            }
            if l > 0 {
                let w = &self.layers[l].weights;
                delta = (0..n_in)
                    .map(|j| {
                        let back: f64 = (0..n_out).map(|i| w[i * n_in + j] * delta[i]).sum();
                        back * (1.0 - a_prev[j] * a_prev[j])
                    })
                    .collect();
            }
            grads[l] = g;
        }
        Ok((Gradient(grads), 0.5 * loss))
    }

    /// Batch gradient and total loss `E`.
    fn batch_gradient_and_loss(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<(Gradient, f64), MlpError> {
        if inputs.is_empty() {
            return Err(MlpError::EmptyBatch);
        }
        if inputs.len() != targets.len() {
            return Err(MlpError::BatchMismatch {
                inputs: inputs.len(),
                targets: targets.len(),
            });
        }
        const CHUNK: usize = 32;
        let mut total = Gradient::zeros_like(self);
        let mut loss = 0.0;
        // examples run in parallel within a chunk; accumulation is in index
        // order, so the sum is bit-identical to a sequential loop
        for (xs, ts) in inputs.chunks(CHUNK).zip(targets.chunks(CHUNK)) {
            let parts: Vec<(Gradient, f64)> = xs
                .par_iter()
                .zip(ts.par_iter())
                .map(|(x, t)| self.example_gradient(x, t))
                .collect::<Result<_, _>>()?;
            for (g, e) in &parts {
                total.add_assign(g);
                loss += e;
            }
        }
        Ok((total, loss))
    }

    /// `∂E/∂θ` for every weight and bias, summed over the batch.
    pub fn batch_gradient(
        &self,
        inputs: &[Vec<f64>],
        targets: &[Vec<f64>],
    ) -> Result<Gradient, MlpError> {
        self.batch_gradient_and_loss(inputs, targets).map(|(g, _)| g)
    }

    /// Total loss `E = ½ Σ ‖t − o‖²`.
    pub fn loss(&self, inputs: &[Vec<f64>], targets: &[Vec<f64>]) -> Result<f64, MlpError> {
        let mut e = 0.0;
        for (x, t) in inputs.iter().zip(targets) {
            let fwd = self.forward(x)?;
            e += 0.5
                * fwd
                    .output()
                    .iter()
                    .zip(t)
                    .map(|(o, t)| (t - o) * (t - o))
                    .sum::<f64>();
        }
        Ok(e)
    }

    /// Mutable access to a single parameter by flat index (the order of
    /// [`Gradient::flatten`]).
    pub fn param_mut(&mut self, mut index: usize) -> &mut f64 {
        for layer in &mut self.layers {
            let n = layer.weights.len();
            if index < n {
                return &mut layer.weights[index];
            }
            index -= n;
            let b = layer.biases.len();
            if index < b {
                return &mut layer.biases[index];
            }
            index -= b;
        }
        panic!("parameter index out of range");
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Argmax over output units, lowest index on ties. With a threshold, a
    /// winning output below it is rejected.
    pub fn classify(&self, input: &[f64], threshold: Option<f64>) -> Result<Decision, MlpError> {
        let fwd = self.forward(input)?;
        Ok(decide(fwd.output(), threshold))
    }
}

pub fn decide(outputs: &[f64], threshold: Option<f64>) -> Decision {
    let mut best = 0;
    for (k, &o) in outputs.iter().enumerate() {
        if o > outputs[best] {
            best = k;
        }
    }
    match threshold {
        Some(tau) if outputs[best] < tau => Decision::Reject,
        _ => Decision::Accept(best),
    }
}

fn check_sizes(sizes: &[usize]) -> Result<(), MlpError> {
    if sizes.len() < 2 {
        return Err(MlpError::TooFewLayers(sizes.len()));
    }
    if let Some(l) = sizes.iter().position(|&n| n == 0) {
        return Err(MlpError::EmptyLayer(l));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub max_epochs: usize,
    pub target_mse: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            max_epochs: DEFAULT_MAX_EPOCHS,
            target_mse: DEFAULT_TARGET_MSE,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |field, reason: &str| {
            Err(MlpError::BadConfig {
                field,
                reason: reason.to_owned(),
            })
        };
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return bad("learning_rate", "must be finite and positive");
        }
        if !(0.0..=1.0).contains(&self.momentum) {
            return bad("momentum", "must lie in [0, 1]");
        }
        if self.target_mse.is_nan() || self.target_mse < 0.0 {
            return bad("target_mse", "must be nonnegative");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainState {
    pub prev_delta: Gradient,
    /// Number of weight updates applied.
    pub epoch: usize,
    /// `mse_history[k]` is the mean squared error after `k` updates.
    pub mse_history: Vec<f64>,
}

impl TrainState {
    pub fn new(net: &MlpNetwork) -> Self {
        Self {
            prev_delta: Gradient::zeros_like(net),
            epoch: 0,
            mse_history: Vec::new(),
        }
    }

    pub fn final_mse(&self) -> Option<f64> {
        self.mse_history.last().copied()
    }
}

/// One momentum update: `Δw = m_c Δw_prev + (1 − m_c) η (−g)`, `w += Δw`.
///
/// At `m_c = 0` the change is exactly `−η g`; at `m_c = 1` it is exactly the
/// previous change.
pub fn momentum_step(net: &mut MlpNetwork, grad: &Gradient, state: &mut TrainState, cfg: &TrainConfig) {
    let mc = cfg.momentum;
    let lr = cfg.learning_rate;
    let delta = |prev: f64, g: f64| -> f64 {
        if mc == 0.0 {
            -(lr * g)
        } else if mc == 1.0 {
            prev
        } else {
            mc * prev + (1.0 - mc) * lr * -g
        }
    };
    for ((layer, g), prev) in net
        .layers
        .iter_mut()
        .zip(&grad.0)
        .zip(&mut state.prev_delta.0)
    {
        for ((w, &gw), pw) in layer.weights.iter_mut().zip(&g.weights).zip(&mut prev.weights) {
            let d = delta(*pw, gw);
            *w += d;
            *pw = d;
        }
        for ((b, &gb), pb) in layer.biases.iter_mut().zip(&g.biases).zip(&mut prev.biases) {
            let d = delta(*pb, gb);
            *b += d;
            *pb = d;
        }
    }
}

/// Mean squared error per output element: `2E / (examples · outputs)`.
fn mse_from_loss(loss: f64, examples: usize, outputs: usize) -> f64 {
    2.0 * loss / (examples * outputs) as f64
}

/// Full-batch training until `max_epochs` updates or `mse <= target_mse`.
pub fn train(
    mut net: MlpNetwork,
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
) -> Result<(MlpNetwork, TrainState), MlpError> {
    cfg.validate()?;
    let mut state = TrainState::new(&net);
    let outputs = net.output_len();
    loop {
        let (grad, loss) = net.batch_gradient_and_loss(inputs, targets)?;
        let mse = mse_from_loss(loss, inputs.len(), outputs);
        if !mse.is_finite() {
            return Err(MlpError::Diverged { epoch: state.epoch });
        }
        state.mse_history.push(mse);
        if mse <= cfg.target_mse || state.epoch >= cfg.max_epochs {
            break;
        }
        momentum_step(&mut net, &grad, &mut state, cfg);
        state.epoch += 1;
        if state.epoch.is_multiple_of(500) {
            log::debug!("epoch {} mse {mse:.6e}", state.epoch);
        }
    }
    Ok((net, state))
}

/// One-hot targets in `{−1, +1}`.
pub fn one_hot(class: usize, classes: usize) -> Vec<f64> {
    (0..classes)
        .map(|k| if k == class { 1.0 } else { -1.0 })
        .collect()
}

/// Constructive sizing: start small and grow every hidden layer until the
/// training MSE reaches the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstructiveConfig {
    pub initial_hidden: Vec<usize>,
    /// Units added to each hidden layer per round.
    pub growth: usize,
    pub max_rounds: usize,
}

#[derive(Debug, Clone)]
pub struct ConstructiveResult {
    pub hidden: Vec<usize>,
    pub net: MlpNetwork,
    pub state: TrainState,
    pub converged: bool,
    /// `(hidden sizes, final mse)` of every round tried.
    pub trials: Vec<(Vec<usize>, f64)>,
}

pub fn constructive_search(
    inputs: &[Vec<f64>],
    targets: &[Vec<f64>],
    cfg: &TrainConfig,
    search: &ConstructiveConfig,
) -> Result<ConstructiveResult, MlpError> {
    let n_in = inputs.first().ok_or(MlpError::EmptyBatch)?.len();
    let n_out = targets.first().ok_or(MlpError::EmptyBatch)?.len();
    let mut hidden = search.initial_hidden.clone();
    let mut trials = Vec::new();
    let mut best: Option<ConstructiveResult> = None;
    for round in 0..search.max_rounds.max(1) {
        let mut sizes = vec![n_in];
        sizes.extend(&hidden);
        sizes.push(n_out);
        let net = MlpNetwork::init(&sizes, cfg.seed.wrapping_add(round as u64))?;
        let (net, state) = train(net, inputs, targets, cfg)?;
        let mse = state.final_mse().unwrap_or(f64::INFINITY);
        trials.push((hidden.clone(), mse));
        let converged = mse <= cfg.target_mse;
        let better = best
            .as_ref()
            .is_none_or(|b| mse < b.state.final_mse().unwrap_or(f64::INFINITY));
        if converged || better {
            best = Some(ConstructiveResult {
                hidden: hidden.clone(),
                net,
                state,
                converged,
                trials: Vec::new(),
            });
        }
        if converged {
            break;
        }
        for h in &mut hidden {
            *h += search.growth;
        }
    }
    let mut out = best.expect("at least one round");
    out.trials = trials;
    Ok(out)
}
