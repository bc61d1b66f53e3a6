//! Fully connected feed-forward network with a steepened logistic activation.
//!
//! Every unit computes `σ(Σ w·h + θ)` with `σ(x) = 1 / (1 + e^{-m x})`. For
//! large `m` the units behave like binary threshold gates while staying
//! differentiable, which is what lets the extractor treat each hidden unit as
//! a Boolean function of the layer below.
//!
//! Training is plain per-instance backpropagation on the summed squared error.
//! The activation derivative is `m·σ(1−σ)`, so every delta carries a factor of
//! `m` compared to the textbook rule.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest magnitude of `m·x` passed to `exp`.
const MAX_EXPONENT: f64 = 700.0;

/// `1 / (1 + e^{-m x})`, saturating instead of overflowing.
pub fn steep_sigmoid(x: f64, m: f64) -> f64 {
    let z = (m * x).clamp(-MAX_EXPONENT, MAX_EXPONENT);
    1.0 / (1.0 + (-z).exp())
}

/// Derivative of [`steep_sigmoid`] with respect to its pre-activation, written
/// in terms of the activation `s`.
pub fn steep_sigmoid_slope(s: f64, m: f64) -> f64 {
    m * s * (1.0 - s)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NetworkConfig {
    /// Units per hidden layer, input side first.
    pub hidden: Vec<usize>,
    pub steepness: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub weight_decay: f64,
    /// Initial weights and biases are drawn uniformly from `[-init_range, init_range]`.
    pub init_range: f64,
    pub seed: u64,
}

impl Default for NetworkConfig {
    fn default() -> Self {
        NetworkConfig {
            hidden: vec![10],
            steepness: 100.0,
            learning_rate: 0.0002,
            epochs: 200,
            weight_decay: 1e-4,
            init_range: 0.005,
            seed: 1,
        }
    }
}

impl NetworkConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.is_empty() {
            return Err(Error::Config("at least one hidden layer is required".into()));
        }
        if self.hidden.contains(&0) {
            return Err(Error::Config("hidden layers must have at least one unit".into()));
        }
        if !(self.steepness.is_finite() && self.steepness > 0.0) {
            return Err(Error::Config(format!(
                "steepness must be positive, got {}",
                self.steepness
            )));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(self.weight_decay.is_finite() && self.weight_decay >= 0.0) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        if !(self.init_range.is_finite() && self.init_range >= 0.0) {
            return Err(Error::Config(format!(
                "init range must be non-negative, got {}",
                self.init_range
            )));
        }
        Ok(())
    }

    pub fn layer_sizes(&self, inputs: usize, outputs: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(inputs);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(outputs);
        sizes
    }
}

/// One weight matrix plus the biases of the units it feeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    /// Row-major, one row of `inputs` weights per output unit.
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Layer {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn weight(&self, unit: usize, input: usize) -> f64 {
        self.weights[unit * self.inputs + input]
    }

    #[inline]
    pub fn row(&self, unit: usize) -> &[f64] {
        &self.weights[unit * self.inputs..(unit + 1) * self.inputs]
    }

    fn pre_activation(&self, unit: usize, below: &[f64]) -> f64 {
        self.row(unit).iter().zip(below).map(|(w, h)| w * h).sum::<f64>() + self.biases[unit]
    }
}

/// Activations of every layer for one instance; `layers[0]` is the input.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub layers: Vec<Vec<f64>>,
}

impl ActivationTrace {
    pub fn output(&self) -> &[f64] {
        self.layers.last().map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Gradient of the squared error with respect to every parameter, laid out
/// like the network's layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<Layer>,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Network {
    pub steepness: f64,
    pub layers: Vec<Layer>,
}

impl Network {
    /// A network with every weight and bias set to zero.
    pub fn zeros(layer_sizes: &[usize], steepness: f64) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::TooFew {
                field: "layer sizes",
                count: layer_sizes.len(),
                min: 2,
            });
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Config("layer sizes must be positive".into()));
        }
        let layers = layer_sizes.windows(2).map(|w| Layer::zeros(w[0], w[1])).collect();
        Ok(Network { steepness, layers })
    }

    /// Seeded uniform initialisation in `[-cfg.init_range, cfg.init_range]`.
    pub fn initialise(cfg: &NetworkConfig, inputs: usize, outputs: usize) -> Result<Self> {
        cfg.validate()?;
        let mut net = Network::zeros(&cfg.layer_sizes(inputs, outputs), cfg.steepness)?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let r = cfg.init_range;
        for layer in &mut net.layers {
            for w in layer.weights.iter_mut().chain(layer.biases.iter_mut()) {
                *w = if r > 0.0 { rng.gen_range(-r..=r) } else { 0.0 };
            }
        }
        Ok(net)
    }

    pub fn layer_sizes(&self) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.layers.len() + 1);
        if let Some(first) = self.layers.first() {
            sizes.push(first.inputs);
        }
        sizes.extend(self.layers.iter().map(|l| l.outputs));
        sizes
    }

    pub fn input_width(&self) -> usize {
        self.layers.first().map_or(0, |l| l.inputs)
    }

    pub fn output_width(&self) -> usize {
        self.layers.last().map_or(0, |l| l.outputs)
    }

    /// Total number of non-input units.
    pub fn unit_count(&self) -> usize {
        self.layers.iter().map(|l| l.outputs).sum()
    }

    pub fn check_dimensions(&self) -> Result<()> {
        for pair in self.layers.windows(2) {
            if pair[0].outputs != pair[1].inputs {
                return Err(Error::Dimension {
                    expected: pair[0].outputs,
                    found: pair[1].inputs,
                });
            }
        }
        for layer in &self.layers {
            if layer.weights.len() != layer.inputs * layer.outputs {
                return Err(Error::Dimension {
                    expected: layer.inputs * layer.outputs,
                    found: layer.weights.len(),
                });
            }
            if layer.biases.len() != layer.outputs {
                return Err(Error::Dimension {
                    expected: layer.outputs,
                    found: layer.biases.len(),
                });
            }
            if layer.weights.iter().chain(&layer.biases).any(|w| !w.is_finite()) {
                return Err(Error::Format("network contains non-finite parameters".into()));
            }
        }
        if !(self.steepness.is_finite() && self.steepness > 0.0) {
            return Err(Error::Format("steepness must be positive".into()));
        }
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_width() {
            return Err(Error::Dimension {
                expected: self.input_width(),
                found: x.len(),
            });
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<ActivationTrace> {
        self.check_input(x)?;
        Ok(self.forward_unchecked(x))
    }

    fn forward_unchecked(&self, x: &[f64]) -> ActivationTrace {
        let mut layers = Vec::with_capacity(self.layers.len() + 1);
        layers.push(x.to_vec());
        for layer in &self.layers {
            let below = layers.last().expect("input layer present");
            let next: Vec<f64> = (0..layer.outputs)
                .map(|j| steep_sigmoid(layer.pre_activation(j, below), self.steepness))
                .collect();
            layers.push(next);
        }
        ActivationTrace { layers }
    }

    pub fn outputs(&self, x: &[f64]) -> Result<Vec<f64>> {
        let trace = self.forward(x)?;
        Ok(trace.layers.into_iter().last().unwrap_or_default())
    }

    /// Index of the most active output unit; ties go to the lowest index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(argmax(&self.outputs(x)?))
    }

    pub fn predict_all(&self, rows: &[Vec<f64>]) -> Result<Vec<usize>> {
        rows.iter().map(|x| self.predict(x)).collect()
    }

    /// Backpropagated gradient of `½ Σ (t − y)²` for one instance.
    pub fn gradient(&self, x: &[f64], target: &[f64]) -> Result<Gradient> {
        self.check_input(x)?;
        if target.len() != self.output_width() {
            return Err(Error::Dimension {
                expected: self.output_width(),
                found: target.len(),
            });
        }
        let trace = self.forward_unchecked(x);
        Ok(self.backward(&trace, target))
    }

    fn backward(&self, trace: &ActivationTrace, target: &[f64]) -> Gradient {
        let m = self.steepness;
        let out = trace.output();
        let loss = 0.5 * out.iter().zip(target).map(|(y, t)| (t - y) * (t - y)).sum::<f64>();

        // dE/d(pre-activation) for the layer currently being processed.
        let mut delta: Vec<f64> = out
            .iter()
            .zip(target)
            .map(|(&y, &t)| (y - t) * steep_sigmoid_slope(y, m))
            .collect();

        let mut grads: Vec<Layer> = self.layers.iter().map(|l| Layer::zeros(l.inputs, l.outputs)).collect();

        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let below = &trace.layers[k];
            let g = &mut grads[k];
            for (j, &d) in delta.iter().enumerate() {
                g.biases[j] = d;
                for (i, &h) in below.iter().enumerate() {
                    g.weights[j * layer.inputs + i] = d * h;
                }
            }
            if k > 0 {
                delta = (0..layer.inputs)
                    .map(|i| {
                        let back: f64 = delta.iter().enumerate().map(|(j, &d)| d * layer.weight(j, i)).sum();
                        back * steep_sigmoid_slope(below[i], m)
                    })
                    .collect();
            }
        }
        Gradient { layers: grads, loss }
    }

    /// One stochastic update: `w ← w·(1 − αλ) − α·∂E/∂w`. Biases are not decayed.
    pub fn apply_gradient(&mut self, grad: &Gradient, learning_rate: f64, weight_decay: f64) {
        let shrink = 1.0 - learning_rate * weight_decay;
        for (layer, g) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, dw) in layer.weights.iter_mut().zip(&g.weights) {
                *w = *w * shrink - learning_rate * dw;
            }
            for (b, db) in layer.biases.iter_mut().zip(&g.biases) {
                *b -= learning_rate * db;
            }
        }
    }

    /// Trains a freshly initialised network on `rows` with one-hot targets
    /// derived from `labels`.
    pub fn train(rows: &[Vec<f64>], labels: &[usize], classes: usize, cfg: &NetworkConfig) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::NoInstances);
        }
        if rows.len() != labels.len() {
            return Err(Error::Dimension {
                expected: rows.len(),
                found: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::InvalidArgument(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let inputs = rows[0].len();
        let mut net = Network::initialise(cfg, inputs, classes)?;
        for x in rows {
            net.check_input(x)?;
        }

        let targets: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| (0..classes).map(|c| if c == l { 1.0 } else { 0.0 }).collect())
            .collect();
        // Separate stream from the initialiser so the order does not depend on
        // how many parameters were drawn.
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        let mut order: Vec<usize> = (0..rows.len()).collect();

        for epoch in 0..cfg.epochs {
            order.shuffle(&mut rng);
            let mut loss = 0.0;
            for &i in &order {
                let trace = net.forward_unchecked(&rows[i]);
                let grad = net.backward(&trace, &targets[i]);
                loss += grad.loss;
                net.apply_gradient(&grad, cfg.learning_rate, cfg.weight_decay);
            }
            if !loss.is_finite() || net.check_dimensions().is_err() {
                return Err(Error::Diverged { epoch: epoch + 1 });
            }
            log::trace!("epoch {}: sse {loss:.6}", epoch + 1);
        }
        Ok(net)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = NetworkFile {
            format: NETWORK_FORMAT.to_string(),
            version: NETWORK_VERSION,
            layer_sizes: self.layer_sizes(),
            network: self.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: NetworkFile = serde_json::from_str(text)?;
        if file.format != NETWORK_FORMAT {
            return Err(Error::Format(format!(
                "expected format {NETWORK_FORMAT:?}, found {:?}",
                file.format
            )));
        }
        if file.version != NETWORK_VERSION {
            return Err(Error::Format(format!(
                "unsupported network file version {}",
                file.version
            )));
        }
        file.network.check_dimensions()?;
        if file.network.layer_sizes() != file.layer_sizes {
            return Err(Error::Format(format!(
                "declared layer sizes {:?} do not match weights {:?}",
                file.layer_sizes,
                file.network.layer_sizes()
            )));
        }
        Ok(file.network)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Network::from_json(&text)
    }
}

const NETWORK_FORMAT: &str = "heretic-network";
const NETWORK_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct NetworkFile {
    format: String,
    version: u32,
    layer_sizes: Vec<usize>,
    #[serde(flatten)]
    network: Network,
}

/// Index of the largest value, lowest index on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}
