//! Classical baseline and hybrid incident-detection networks.
//!
//! Classical: 6 → 48 relu → 32 relu → 1 sigmoid.
//! Hybrid: 6 → 48 relu → 32 relu → q relu → quantum(q) → q relu → 1 sigmoid,
//! where the quantum stage embeds its inputs as raw RX angles.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureRow, Normalization, N_FEATURES};
use crate::error::{Error, Result};
use crate::nn::{bce_gradient, bce_loss, Activation, AdamState, DenseCache, DenseLayer, TrainConfig};
use crate::qsim::{quantum_forward, quantum_gradients, QuantumLayerParams, QuantumLayerSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Classical,
    Hybrid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModelConfig {
    pub kind: ModelKind,
    pub hidden_widths: Vec<usize>,
    /// Quantum register width; ignored for the classical model.
    pub n_qubits: usize,
    pub n_entangler_layers: usize,
    pub output_threshold: f64,
}

impl HybridModelConfig {
    pub fn classical() -> Self {
        Self {
            kind: ModelKind::Classical,
            hidden_widths: vec![48, 32],
            n_qubits: 0,
            n_entangler_layers: 0,
            output_threshold: 0.5,
        }
    }

    pub fn hybrid(n_qubits: usize) -> Self {
        Self {
            kind: ModelKind::Hybrid,
            n_qubits,
            n_entangler_layers: 1,
            ..Self::classical()
        }
    }

    /// Short label: `classical`, `hybrid-2q`, `hybrid-4q`, ...
    pub fn label(&self) -> String {
        match self.kind {
            ModelKind::Classical => "classical".to_string(),
            ModelKind::Hybrid => format!("hybrid-{}q", self.n_qubits),
        }
    }

    /// Inverse of [`HybridModelConfig::label`].
    pub fn from_label(label: &str) -> Result<Self> {
        if label == "classical" {
            return Ok(Self::classical());
        }
        label
            .strip_prefix("hybrid-")
            .and_then(|rest| rest.strip_suffix('q'))
            .and_then(|n| n.parse::<usize>().ok())
            .map(Self::hybrid)
            .ok_or_else(|| Error::config(format!("unknown model kind `{label}`")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_widths.is_empty() || self.hidden_widths.contains(&0) {
            return Err(Error::config("hidden widths must be non-empty and positive"));
        }
        if !(0.0..=1.0).contains(&self.output_threshold) {
            return Err(Error::config("output_threshold must lie in [0, 1]"));
        }
        if self.kind == ModelKind::Hybrid {
            QuantumLayerSpec::new(self.n_qubits, self.n_entangler_layers)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum Stage {
    Dense(DenseLayer),
    Quantum {
        spec: QuantumLayerSpec,
        params: QuantumLayerParams,
    },
}

impl Stage {
    fn n_params(&self) -> usize {
        match self {
            Stage::Dense(layer) => layer.n_params(),
            Stage::Quantum { spec, .. } => spec.n_weights(),
        }
    }
}

#[derive(Debug, Clone)]
enum StageCache {
    Dense(DenseCache),
    Quantum { inputs: Vec<f64> },
}

/// Per-sample activations recorded by [`Model::forward_cached`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    stages: Vec<StageCache>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Model {
    pub config: HybridModelConfig,
    pub stages: Vec<Stage>,
}

type QuantumFn<'a> = &'a dyn Fn(&[f64], &QuantumLayerParams, &QuantumLayerSpec) -> Result<Vec<f64>>;

impl Model {
    pub fn n_params(&self) -> usize {
        self.stages.iter().map(Stage::n_params).sum()
    }

    /// All parameters in stage order: dense weights (row-major) then biases,
    /// quantum weights `[layer][qubit]`.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for stage in &self.stages {
            match stage {
                Stage::Dense(layer) => layer.write_params(&mut out),
                Stage::Quantum { params, .. } => {
                    params.weights.iter().for_each(|row| out.extend_from_slice(row))
                }
            }
        }
        out
    }

    pub fn set_params(&mut self, values: &[f64]) -> Result<()> {
        if values.len() != self.n_params() {
            return Err(Error::argument(format!(
                "model has {} parameters, got {}",
                self.n_params(),
                values.len()
            )));
        }
        let mut offset = 0;
        for stage in &mut self.stages {
            let n = stage.n_params();
            let chunk = &values[offset..offset + n];
            match stage {
                Stage::Dense(layer) => layer.read_params(chunk),
                Stage::Quantum { spec, params } => {
                    for (row, src) in params.weights.iter_mut().zip(chunk.chunks_exact(spec.n_qubits)) {
                        row.copy_from_slice(src);
                    }
                }
            }
            offset += n;
        }
        Ok(())
    }

    pub fn forward_cached(&self, features: &[f64]) -> Result<(f64, ForwardCache)> {
        self.forward_cached_with(features, &quantum_forward)
    }

    fn forward_cached_with(&self, features: &[f64], quantum: QuantumFn) -> Result<(f64, ForwardCache)> {
        if features.len() != N_FEATURES {
            return Err(Error::argument(format!(
                "model expects {N_FEATURES} features, got {}",
                features.len()
            )));
        }
        let mut caches = Vec::with_capacity(self.stages.len());
        let mut activation = features.to_vec();
        for stage in &self.stages {
            match stage {
                Stage::Dense(layer) => {
                    let cache = layer.forward(&activation)?;
                    activation = cache.output.clone();
                    caches.push(StageCache::Dense(cache));
                }
                Stage::Quantum { spec, params } => {
                    let out = quantum(&activation, params, spec)?;
                    caches.push(StageCache::Quantum {
                        inputs: std::mem::replace(&mut activation, out),
                    });
                }
            }
        }
        match activation.as_slice() {
            [p] => Ok((*p, ForwardCache { stages: caches })),
            _ => Err(Error::State("model output is not a single probability".into())),
        }
    }

    /// Reverse-mode gradient of the loss w.r.t. every parameter, given
    /// ∂loss/∂probability. Quantum stages contribute parameter-shift Jacobians.
    pub fn backward(&self, cache: &ForwardCache, grad_probability: f64) -> Result<Vec<f64>> {
        let mut grad = vec![0.0; self.n_params()];
        self.backward_into(cache, grad_probability, &mut grad)?;
        Ok(grad)
    }

    fn backward_into(&self, cache: &ForwardCache, grad_probability: f64, grad: &mut [f64]) -> Result<()> {
        if cache.stages.len() != self.stages.len() {
            return Err(Error::State("forward cache does not match the model".into()));
        }
        let mut offsets = Vec::with_capacity(self.stages.len());
        let mut offset = 0;
        for stage in &self.stages {
            offsets.push(offset);
            offset += stage.n_params();
        }

        let mut upstream = vec![grad_probability];
        for ((stage, stage_cache), &start) in self.stages.iter().zip(&cache.stages).zip(&offsets).rev() {
            let slot = &mut grad[start..start + stage.n_params()];
            upstream = match (stage, stage_cache) {
                (Stage::Dense(layer), StageCache::Dense(c)) => layer.backward(c, &upstream, slot)?,
                (Stage::Quantum { spec, params }, StageCache::Quantum { inputs }) => {
                    let jac = quantum_gradients(inputs, params, spec)?;
                    let dot = |col: &[f64]| col.iter().zip(&upstream).map(|(d, g)| d * g).sum::<f64>();
                    let n = spec.n_qubits;
                    for (l, layer) in jac.d_weights.iter().enumerate() {
                        for (i, col) in layer.iter().enumerate() {
                            slot[l * n + i] += dot(col);
                        }
                    }
                    jac.d_inputs.iter().map(|col| dot(col)).collect()
                }
                _ => return Err(Error::State("forward cache does not match the model".into())),
            };
        }
        Ok(())
    }

    /// BCE loss and its full parameter gradient for one sample.
    pub fn loss_and_gradient(&self, features: &[f64], label: f64) -> Result<(f64, Vec<f64>)> {
        let (p, cache) = self.forward_cached(features)?;
        let grad = self.backward(&cache, bce_gradient(p, label))?;
        Ok((bce_loss(p, label), grad))
    }

    pub fn loss(&self, features: &[f64], label: f64) -> Result<f64> {
        Ok(bce_loss(forward(self, features)?, label))
    }
}

/// Builds the layer stack with Glorot dense layers and uniform [0, 2π) quantum weights.
pub fn build_model(config: &HybridModelConfig, seed: u64) -> Result<Model> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stages = Vec::new();
    let mut width = N_FEATURES;
    let push_dense = |stages: &mut Vec<Stage>, width: &mut usize, out: usize, act, rng: &mut ChaCha8Rng| -> Result<()> {
        stages.push(Stage::Dense(DenseLayer::glorot(*width, out, act, rng)?));
        *width = out;
        Ok(())
    };
    for &h in &config.hidden_widths {
        push_dense(&mut stages, &mut width, h, Activation::Relu, &mut rng)?;
    }
    if config.kind == ModelKind::Hybrid {
        let spec = QuantumLayerSpec::new(config.n_qubits, config.n_entangler_layers)?;
        push_dense(&mut stages, &mut width, spec.n_qubits, Activation::Relu, &mut rng)?;
        stages.push(Stage::Quantum {
            spec,
            params: QuantumLayerParams::random(&spec, &mut rng),
        });
        push_dense(&mut stages, &mut width, spec.n_qubits, Activation::Relu, &mut rng)?;
    }
    push_dense(&mut stages, &mut width, 1, Activation::Sigmoid, &mut rng)?;
    Ok(Model {
        config: config.clone(),
        stages,
    })
}

/// Incident probability for one normalized feature vector.
pub fn forward(model: &Model, features: &[f64]) -> Result<f64> {
    model.forward_cached(features).map(|(p, _)| p)
}

/// 1 iff the probability reaches the configured threshold (inclusive).
pub fn predict(model: &Model, features: &[f64]) -> Result<u8> {
    Ok(u8::from(forward(model, features)? >= model.config.output_threshold))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub model: Model,
    /// Feature scaling fitted on the training rows, if the rows were normalized.
    pub normalization: Option<Normalization>,
    pub train_config: TrainConfig,
    pub history: Vec<EpochStats>,
    pub seed: u64,
}

impl TrainedModel {
    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = Some(normalization);
        self
    }

    /// Prediction on already-normalized features.
    pub fn predict(&self, features: &[f64]) -> Result<u8> {
        predict(&self.model, features)
    }

    /// Prediction on raw features, scaled with the stored normalization.
    pub fn predict_raw(&self, features: &[f64; N_FEATURES]) -> Result<u8> {
        match &self.normalization {
            Some(norm) => predict(&self.model, &norm.apply(features)),
            None => predict(&self.model, features),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Mini-batch Adam on mean BCE. Batches follow the row order unless
/// `config.shuffle` is set; the final partial batch is used as is.
pub fn train(mut model: Model, rows: &[FeatureRow], config: &TrainConfig) -> Result<TrainedModel> {
    config.validate()?;
    if rows.is_empty() {
        return Err(Error::argument("training set is empty"));
    }
    let mut adam = AdamState::new(model.n_params(), config.learning_rate);
    let mut params = model.params();
    let mut grad = vec![0.0; params.len()];
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut history = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        if config.shuffle {
            order.shuffle(&mut rng);
        }
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for batch in order.chunks(config.batch_size) {
            grad.iter_mut().for_each(|g| *g = 0.0);
            for &idx in batch {
                let row = &rows[idx];
                let label = f64::from(row.label);
                let (p, cache) = model.forward_cached(&row.features)?;
                loss_sum += bce_loss(p, label);
                correct += usize::from(u8::from(p >= model.config.output_threshold) == row.label);
                model.backward_into(&cache, bce_gradient(p, label), &mut grad)?;
            }
            let scale = 1.0 / batch.len() as f64;
            grad.iter_mut().for_each(|g| *g *= scale);
            adam.step(&mut params, &grad)?;
            model.set_params(&params)?;
        }
        let mean_loss = loss_sum / rows.len() as f64;
        if !mean_loss.is_finite() {
            return Err(Error::State(format!("training diverged at epoch {epoch}")));
        }
        history.push(EpochStats {
            epoch: epoch + 1,
            mean_loss,
            accuracy: correct as f64 / rows.len() as f64,
        });
    }

    Ok(TrainedModel {
        model,
        normalization: None,
        train_config: config.clone(),
        history,
        seed: config.seed,
    })
}
