//! Python module `qinc`: the simulator, data pipeline, models and experiment
//! runner. Structured results cross the boundary as plain dicts and lists.

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use qinc::data::{FeatureRow, SplitName, N_FEATURES};
use qinc::eval::{self, MeanCounts};
use qinc::gen::{self, ScenarioConfig, ScheduleSource};
use qinc::model::{self, HybridModelConfig, Model};
use qinc::nn::TrainConfig;
use qinc::pipeline;
use qinc::qsim::{self, QuantumLayerParams, QuantumLayerSpec};
use qinc::verify;
use serde::Serialize;

/// `(time_s, vehicle_id, zone_id, speed_mps)` per record.
type Records = Vec<(u64, String, usize, f64)>;
/// Feature rows and their labels.
type Xy = (Vec<Vec<f64>>, Vec<u8>);

fn py_err(e: qinc::Error) -> PyErr {
    match e {
        qinc::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// Serde value → Python object via the stdlib json module; NaN becomes None.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

fn circuit(inputs: &[f64], weights: Vec<Vec<f64>>) -> PyResult<(QuantumLayerSpec, QuantumLayerParams)> {
    let spec = QuantumLayerSpec::new(inputs.len(), weights.len()).map_err(py_err)?;
    let params = QuantumLayerParams { weights };
    params.check_shape(&spec).map_err(py_err)?;
    Ok((spec, params))
}

/// Pauli-Z expectations after embedding `inputs` and applying `weights` (L × n).
#[pyfunction]
fn quantum_forward(inputs: Vec<f64>, weights: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
    let (spec, params) = circuit(&inputs, weights)?;
    qsim::quantum_forward(&inputs, &params, &spec).map_err(py_err)
}

/// `(d_inputs[i][j], d_weights[l][i][j])` with j indexing the output qubit.
#[pyfunction]
#[allow(clippy::type_complexity)]
fn quantum_gradients(inputs: Vec<f64>, weights: Vec<Vec<f64>>) -> PyResult<(Vec<Vec<f64>>, Vec<Vec<Vec<f64>>>)> {
    let (spec, params) = circuit(&inputs, weights)?;
    let g = qsim::quantum_gradients(&inputs, &params, &spec).map_err(py_err)?;
    Ok((g.d_inputs, g.d_weights))
}

fn scenario(n_zones: usize, duration_s: u64, seed: u64, n_incidents: Option<usize>) -> ScenarioConfig {
    ScenarioConfig {
        n_zones,
        duration_s,
        seed,
        schedule: ScheduleSource::Auto { n_incidents },
        ..ScenarioConfig::default()
    }
}

/// Simulated BSM records as `(time_s, vehicle_id, zone_id, speed_mps)` plus the incident schedule.
#[pyfunction]
#[pyo3(signature = (n_zones = 56, duration_s = 1250, seed = 0, n_incidents = None))]
fn generate(
    py: Python<'_>,
    n_zones: usize,
    duration_s: u64,
    seed: u64,
    n_incidents: Option<usize>,
) -> PyResult<(Records, Py<PyAny>)> {
    let config = scenario(n_zones, duration_s, seed, n_incidents);
    config.validate().map_err(py_err)?;
    let (records, schedule) = gen::generate(&config).map_err(py_err)?;
    let records = records
        .into_iter()
        .map(|r| (r.time, r.vehicle_id, r.zone_id, r.speed))
        .collect();
    Ok((records, to_py(py, &schedule)?))
}

fn unzip(rows: &[FeatureRow]) -> Xy {
    rows.iter().map(|r| (r.features.to_vec(), r.label)).unzip()
}

/// Labeled, unnormalized feature rows `(X, y)` for a generated scenario.
#[pyfunction]
#[pyo3(signature = (n_zones = 56, duration_s = 1250, seed = 0, bucket_seconds = 1))]
fn features(n_zones: usize, duration_s: u64, seed: u64, bucket_seconds: u64) -> PyResult<Xy> {
    let config = scenario(n_zones, duration_s, seed, None);
    config.validate().map_err(py_err)?;
    let rows = pipeline::scenario_rows(&config, bucket_seconds).map_err(py_err)?.rows;
    Ok(unzip(&rows))
}

fn split_name(name: &str) -> PyResult<SplitName> {
    name.parse().map_err(py_err)
}

/// Normalized train/test arrays for "DS-1", "DS-2" or "DS-3".
#[pyfunction]
#[pyo3(signature = (name, n_zones = 56, duration_s = 1250, seed = 0))]
fn prepare_split(
    name: &str,
    n_zones: usize,
    duration_s: u64,
    seed: u64,
) -> PyResult<(Xy, Xy)> {
    let config = scenario(n_zones, duration_s, seed, None);
    config.validate().map_err(py_err)?;
    let split = pipeline::prepare_split(&config, split_name(name)?).map_err(py_err)?;
    Ok((unzip(&split.train_rows), unzip(&split.test_rows)))
}

/// Accuracy, precision, recall and F2 from (possibly fractional) counts; undefined values are None.
#[pyfunction]
#[pyo3(signature = (tp, fp, fn_, total))]
fn metrics(py: Python<'_>, tp: f64, fp: f64, fn_: f64, total: f64) -> PyResult<Py<PyAny>> {
    to_py(py, &eval::metrics(MeanCounts::from_table(tp, fp, fn_, total)).metrics)
}

fn rows_from(x: Vec<Vec<f64>>, y: Vec<u8>) -> PyResult<Vec<FeatureRow>> {
    if x.len() != y.len() {
        return Err(PyValueError::new_err(format!("{} feature rows but {} labels", x.len(), y.len())));
    }
    x.into_iter()
        .zip(y)
        .map(|(f, label)| {
            let features: [f64; N_FEATURES] = f
                .try_into()
                .map_err(|f: Vec<f64>| PyValueError::new_err(format!("expected {N_FEATURES} features, got {}", f.len())))?;
            if label > 1 {
                return Err(PyValueError::new_err("labels must be 0 or 1"));
            }
            Ok(FeatureRow {
                bucket_start: 0,
                zone_id: 0,
                features,
                label,
            })
        })
        .collect()
}

/// Classical or hybrid detector over normalized feature rows.
#[pyclass(name = "Model", module = "qinc")]
struct PyModel {
    inner: Model,
}

#[pymethods]
impl PyModel {
    /// `kind` is "classical" or "hybrid-<n>q".
    #[new]
    #[pyo3(signature = (kind = "hybrid-4q", seed = 0))]
    fn new(kind: &str, seed: u64) -> PyResult<Self> {
        let config = HybridModelConfig::from_label(kind).map_err(py_err)?;
        Ok(Self {
            inner: model::build_model(&config, seed).map_err(py_err)?,
        })
    }

    #[getter]
    fn kind(&self) -> String {
        self.inner.config.label()
    }

    #[getter]
    fn n_params(&self) -> usize {
        self.inner.n_params()
    }

    fn params(&self) -> Vec<f64> {
        self.inner.params()
    }

    fn set_params(&mut self, values: Vec<f64>) -> PyResult<()> {
        self.inner.set_params(&values).map_err(py_err)
    }

    /// Incident probability for one row.
    fn forward(&self, features: Vec<f64>) -> PyResult<f64> {
        model::forward(&self.inner, &features).map_err(py_err)
    }

    fn predict(&self, features: Vec<f64>) -> PyResult<u8> {
        model::predict(&self.inner, &features).map_err(py_err)
    }

    /// Trains in place; returns per-epoch `{epoch, mean_loss, accuracy}`.
    #[pyo3(signature = (x, y, epochs = 20, batch_size = 16, learning_rate = 0.001, seed = 0, shuffle = false))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        &mut self,
        py: Python<'_>,
        x: Vec<Vec<f64>>,
        y: Vec<u8>,
        epochs: usize,
        batch_size: usize,
        learning_rate: f64,
        seed: u64,
        shuffle: bool,
    ) -> PyResult<Py<PyAny>> {
        let rows = rows_from(x, y)?;
        let config = TrainConfig {
            epochs,
            batch_size,
            learning_rate,
            seed,
            shuffle,
        };
        let trained = model::train(self.inner.clone(), &rows, &config).map_err(py_err)?;
        self.inner = trained.model;
        to_py(py, &trained.history)
    }

    fn to_json(&self) -> PyResult<String> {
        serde_json::to_string(&self.inner).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = serde_json::from_str(text).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok(Self { inner })
    }

    fn __repr__(&self) -> String {
        format!("Model(kind={:?}, n_params={})", self.inner.config.label(), self.inner.n_params())
    }
}

/// Repeated train/evaluate runs on one split; returns the aggregate as a dict.
#[pyfunction]
#[pyo3(signature = (split = "DS-3", model = "hybrid-4q", n_runs = 5, base_seed = 0, epochs = 20, scenario_seed = 0, jobs = 1))]
#[allow(clippy::too_many_arguments)]
fn run_experiment(
    py: Python<'_>,
    split: &str,
    model: &str,
    n_runs: usize,
    base_seed: u64,
    epochs: usize,
    scenario_seed: u64,
    jobs: usize,
) -> PyResult<Py<PyAny>> {
    let config = HybridModelConfig::from_label(model).map_err(py_err)?;
    let base = ScenarioConfig {
        seed: scenario_seed,
        ..ScenarioConfig::default()
    };
    let data = pipeline::prepare_split(&base, split_name(split)?).map_err(py_err)?;
    let train = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let aggregate = py
        .detach(|| eval::run_experiment(&config, &data, &train, n_runs, base_seed, jobs.max(1)))
        .map_err(py_err)?;
    to_py(py, &aggregate)
}

/// Oracle, parameter-shift and end-to-end gradient suites.
#[pyfunction]
#[pyo3(signature = (seed = 0))]
fn gradcheck(py: Python<'_>, seed: u64) -> PyResult<Py<PyAny>> {
    to_py(py, &verify::run_gradcheck(seed, false))
}

#[pymodule]
#[pyo3(name = "qinc")]
fn qinc_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(quantum_forward, m)?)?;
    m.add_function(wrap_pyfunction!(quantum_gradients, m)?)?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(features, m)?)?;
    m.add_function(wrap_pyfunction!(prepare_split, m)?)?;
    m.add_function(wrap_pyfunction!(metrics, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(gradcheck, m)?)?;
    m.add_class::<PyModel>()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_from_validates_shape_and_labels() {
        let ok = rows_from(vec![vec![0.5; 6], vec![0.1; 6]], vec![0, 1]).unwrap();
        assert_eq!(ok[1].label, 1);
        assert!(rows_from(vec![vec![0.5; 6]], vec![]).is_err());
        assert!(rows_from(vec![vec![0.5; 5]], vec![0]).is_err());
        assert!(rows_from(vec![vec![0.5; 6]], vec![2]).is_err());
    }

    #[test]
    fn circuit_shape_comes_from_arguments() {
        let (spec, _) = circuit(&[0.1, 0.2, 0.3], vec![vec![0.0; 3]; 2]).unwrap();
        assert_eq!((spec.n_qubits, spec.n_entangler_layers), (3, 2));
        assert!(circuit(&[0.1, 0.2], vec![vec![0.0; 3]]).is_err());
    }
}
