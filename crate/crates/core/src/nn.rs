//! Dense layers, activations, binary cross-entropy and Adam.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probability clamp used by the loss and its gradient.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
    Identity,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Sigmoid => sigmoid(x),
            Activation::Identity => x,
        }
    }

    /// Derivative at the pre-activation value. ReLU uses 0 at exactly 0.
    pub fn derivative(self, pre_activation: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre_activation > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(pre_activation);
                s * (1.0 - s)
            }
            Activation::Identity => 1.0,
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// −(y ln p + (1 − y) ln(1 − p)) with p clamped into [ε, 1 − ε].
pub fn bce_loss(prediction: f64, label: f64) -> f64 {
    let p = prediction.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    -(label * p.ln() + (1.0 - label) * (1.0 - p).ln())
}

/// ∂loss/∂prediction under the same clamp.
pub fn bce_gradient(prediction: f64, label: f64) -> f64 {
    let p = prediction.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
    (p - label) / (p * (1.0 - p))
}

/// Fully connected layer. Weights are stored row-major, `[out][in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DenseLayerDoc")]
pub struct DenseLayer {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

#[derive(Deserialize)]
struct DenseLayerDoc {
    in_dim: usize,
    out_dim: usize,
    activation: Activation,
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl TryFrom<DenseLayerDoc> for DenseLayer {
    type Error = Error;

    fn try_from(doc: DenseLayerDoc) -> Result<Self> {
        DenseLayer::new(doc.in_dim, doc.out_dim, doc.weights, doc.biases, doc.activation)
    }
}

/// Values kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct DenseCache {
    pub input: Vec<f64>,
    pub pre_activation: Vec<f64>,
    pub output: Vec<f64>,
}

impl DenseLayer {
    pub fn new(
        in_dim: usize,
        out_dim: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if in_dim == 0 || out_dim == 0 {
            return Err(Error::argument("dense layer dimensions must be at least 1"));
        }
        if weights.len() != in_dim * out_dim || biases.len() != out_dim {
            return Err(Error::argument(format!(
                "dense layer {out_dim}x{in_dim} got {} weights and {} biases",
                weights.len(),
                biases.len()
            )));
        }
        if !weights.iter().chain(&biases).all(|v| v.is_finite()) {
            return Err(Error::argument("dense layer parameters must be finite"));
        }
        Ok(Self {
            in_dim,
            out_dim,
            activation,
            weights,
            biases,
        })
    }

    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Result<Self> {
        Self::new(in_dim, out_dim, vec![0.0; in_dim * out_dim], vec![0.0; out_dim], activation)
    }

    /// Glorot-uniform weights in ±√(6/(in+out)), zero biases.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = glorot_limit(in_dim, out_dim);
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Self::new(in_dim, out_dim, weights, vec![0.0; out_dim], activation)
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.biases.len()
    }

    pub fn forward(&self, input: &[f64]) -> Result<DenseCache> {
        if input.len() != self.in_dim {
            return Err(Error::argument(format!(
                "dense layer expects {} inputs, got {}",
                self.in_dim,
                input.len()
            )));
        }
        let pre_activation: Vec<f64> = self
            .weights
            .chunks_exact(self.in_dim)
            .zip(&self.biases)
            .map(|(row, b)| row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>() + b)
            .collect();
        let output = pre_activation.iter().map(|&z| self.activation.apply(z)).collect();
        Ok(DenseCache {
            input: input.to_vec(),
            pre_activation,
            output,
        })
    }

    /// Accumulates ∂loss/∂(weights, biases) into `grad` (laid out like
    /// [`DenseLayer::write_params`]) and returns ∂loss/∂input.
    pub fn backward(&self, cache: &DenseCache, grad_output: &[f64], grad: &mut [f64]) -> Result<Vec<f64>> {
        if cache.input.len() != self.in_dim
            || cache.pre_activation.len() != self.out_dim
            || grad_output.len() != self.out_dim
            || grad.len() != self.n_params()
        {
            return Err(Error::State("dense cache or gradient does not match layer shape".into()));
        }
        let (grad_w, grad_b) = grad.split_at_mut(self.weights.len());
        let mut grad_input = vec![0.0; self.in_dim];
        for o in 0..self.out_dim {
            let delta = grad_output[o] * self.activation.derivative(cache.pre_activation[o]);
            if delta == 0.0 {
                continue;
            }
            grad_b[o] += delta;
            let row = o * self.in_dim;
            for i in 0..self.in_dim {
                grad_w[row + i] += delta * cache.input[i];
                grad_input[i] += delta * self.weights[row + i];
            }
        }
        Ok(grad_input)
    }

    /// Appends weights (row-major) then biases.
    pub fn write_params(&self, out: &mut Vec<f64>) {
        out.extend_from_slice(&self.weights);
        out.extend_from_slice(&self.biases);
    }

    /// Inverse of [`DenseLayer::write_params`]; `params` must hold exactly `n_params` values.
    pub fn read_params(&mut self, params: &[f64]) {
        let (w, b) = params.split_at(self.weights.len());
        self.weights.copy_from_slice(w);
        self.biases.copy_from_slice(b);
    }
}

pub fn glorot_limit(in_dim: usize, out_dim: usize) -> f64 {
    (6.0 / (in_dim + out_dim) as f64).sqrt()
}

/// `(pre_activation, output)` of one layer.
pub fn dense_forward(layer: &DenseLayer, input: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let cache = layer.forward(input)?;
    Ok((cache.pre_activation, cache.output))
}

/// Seeded Glorot-uniform layer.
pub fn init_layer(in_dim: usize, out_dim: usize, activation: Activation, seed: u64) -> Result<DenseLayer> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseLayer::glorot(in_dim, out_dim, activation, &mut rng)
}

/// Adam with bias correction over a flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step_count: u64,
    pub first_moment: Vec<f64>,
    pub second_moment: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, learning_rate: f64) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step_count: 0,
            first_moment: vec![0.0; n_params],
            second_moment: vec![0.0; n_params],
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.first_moment.len() || grads.len() != params.len() {
            return Err(Error::argument(format!(
                "adam tracks {} parameters, got {} params and {} grads",
                self.first_moment.len(),
                params.len(),
                grads.len()
            )));
        }
        self.step_count += 1;
        let t = self.step_count as i32;
        let bias1 = 1.0 - self.beta1.powi(t);
        let bias2 = 1.0 - self.beta2.powi(t);
        for (((theta, &g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first_moment)
            .zip(&mut self.second_moment)
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let m_hat = *m / bias1;
            let v_hat = *v / bias2;
            *theta -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    /// Reshuffle sample order each epoch from `seed`.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 20,
            batch_size: 16,
            learning_rate: 0.001,
            seed: 0,
            shuffle: false,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::config("epochs and batch_size must be at least 1"));
        }
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        Ok(())
    }
}
