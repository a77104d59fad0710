//! Reference checks for the quantum layer and the backward pass.
//!
//! The dense oracle builds every gate as an explicit 2^n × 2^n Kronecker
//! product and multiplies full matrices, sharing no code with [`crate::qsim`].

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::model::{build_model, HybridModelConfig};
use crate::qsim::{quantum_forward, quantum_gradients, QuantumGradient, QuantumLayerParams, QuantumLayerSpec};

type Matrix = Vec<Vec<Complex64>>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn identity(dim: usize) -> Matrix {
    (0..dim)
        .map(|i| (0..dim).map(|j| c(f64::from(u8::from(i == j)), 0.0)).collect())
        .collect()
}

fn kron(a: &Matrix, b: &Matrix) -> Matrix {
    let (ra, rb) = (a.len(), b.len());
    let mut out = vec![vec![c(0.0, 0.0); ra * rb]; ra * rb];
    for i in 0..ra {
        for j in 0..ra {
            for k in 0..rb {
                for l in 0..rb {
                    out[i * rb + k][j * rb + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn matmul(a: &Matrix, b: &Matrix) -> Matrix {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i][k];
            for j in 0..n {
                out[i][j] += aik * b[k][j];
            }
        }
    }
    out
}

fn add(a: &Matrix, b: &Matrix) -> Matrix {
    a.iter()
        .zip(b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x + y).collect())
        .collect()
}

/// `ops[q]` on qubit q, leftmost factor = qubit 0.
fn tensor(ops: &[Matrix]) -> Matrix {
    ops.iter().skip(1).fold(ops[0].clone(), |acc, op| kron(&acc, op))
}

fn rx(theta: f64) -> Matrix {
    let (s, co) = (theta / 2.0).sin_cos();
    vec![vec![c(co, 0.0), c(0.0, -s)], vec![c(0.0, -s), c(co, 0.0)]]
}

fn single(n: usize, qubit: usize, op: Matrix) -> Matrix {
    let ops: Vec<Matrix> = (0..n).map(|q| if q == qubit { op.clone() } else { identity(2) }).collect();
    tensor(&ops)
}

fn cnot(n: usize, control: usize, target: usize) -> Matrix {
    let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    let x = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
    let term = |control_op: &Matrix, target_op: Option<&Matrix>| {
        let ops: Vec<Matrix> = (0..n)
            .map(|q| {
                if q == control {
                    control_op.clone()
                } else if q == target {
                    target_op.cloned().unwrap_or_else(|| identity(2))
                } else {
                    identity(2)
                }
            })
            .collect();
        tensor(&ops)
    };
    add(&term(&p0, None), &term(&p1, Some(&x)))
}

/// Full circuit unitary: embedding, then each entangler layer.
pub fn dense_circuit_unitary(inputs: &[f64], weights: &[Vec<f64>]) -> Vec<Vec<Complex64>> {
    let n = inputs.len();
    let mut u = identity(1 << n);
    let mut apply = |gate: Matrix| u = matmul(&gate, &u);
    for (q, &a) in inputs.iter().enumerate() {
        apply(single(n, q, rx(a)));
    }
    for layer in weights {
        for (q, &a) in layer.iter().enumerate() {
            apply(single(n, q, rx(a)));
        }
        let ring: Vec<(usize, usize)> = if n == 2 {
            vec![(0, 1)]
        } else if n > 2 {
            (0..n).map(|q| (q, (q + 1) % n)).collect()
        } else {
            vec![]
        };
        for (ctl, tgt) in ring {
            apply(cnot(n, ctl, tgt));
        }
    }
    u
}

/// ⟨Z_q⟩ of `U|0…0⟩` computed as ψ† Z_q ψ with dense operators.
pub fn dense_forward_oracle(inputs: &[f64], weights: &[Vec<f64>]) -> Vec<f64> {
    let n = inputs.len();
    let u = dense_circuit_unitary(inputs, weights);
    let psi: Vec<Complex64> = u.iter().map(|row| row[0]).collect();
    let z = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(-1.0, 0.0)]];
    (0..n)
        .map(|q| {
            let zq = single(n, q, z.clone());
            let mut acc = c(0.0, 0.0);
            for i in 0..psi.len() {
                for j in 0..psi.len() {
                    acc += psi[i].conj() * zq[i][j] * psi[j];
                }
            }
            acc.re
        })
        .collect()
}

/// Central-difference Jacobian of [`quantum_forward`], shaped like [`QuantumGradient`].
pub fn finite_difference_jacobian(
    inputs: &[f64],
    params: &QuantumLayerParams,
    spec: &QuantumLayerSpec,
    h: f64,
) -> QuantumGradient {
    let eval = |x: &[f64], p: &QuantumLayerParams| quantum_forward(x, p, spec).expect("valid shapes");
    let central = |plus: Vec<f64>, minus: Vec<f64>| -> Vec<f64> {
        plus.iter().zip(&minus).map(|(a, b)| (a - b) / (2.0 * h)).collect()
    };
    let d_inputs = (0..inputs.len())
        .map(|i| {
            let mut x = inputs.to_vec();
            x[i] += h;
            let plus = eval(&x, params);
            x[i] -= 2.0 * h;
            central(plus, eval(&x, params))
        })
        .collect();
    let d_weights = (0..params.weights.len())
        .map(|l| {
            (0..spec.n_qubits)
                .map(|i| {
                    let mut p = params.clone();
                    p.weights[l][i] += h;
                    let plus = eval(inputs, &p);
                    p.weights[l][i] -= 2.0 * h;
                    central(plus, eval(inputs, &p))
                })
                .collect()
        })
        .collect();
    QuantumGradient { d_inputs, d_weights }
}

pub fn max_jacobian_error(a: &QuantumGradient, b: &QuantumGradient) -> f64 {
    let inputs = a.d_inputs.iter().flatten().zip(b.d_inputs.iter().flatten());
    let weights = a
        .d_weights
        .iter()
        .flatten()
        .flatten()
        .zip(b.d_weights.iter().flatten().flatten());
    inputs.chain(weights).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub tolerance: f64,
    /// Largest absolute error (relative error for the hybrid suite).
    pub max_error: f64,
    pub worst_case: String,
    pub passed: bool,
}

fn track(worst: &mut (f64, String), err: f64, at: impl FnOnce() -> String) {
    if err > worst.0 || (err.is_nan() && !worst.0.is_nan()) {
        *worst = (err, at());
    }
}

fn finish(name: &'static str, cases: usize, tolerance: f64, worst: (f64, String)) -> SuiteReport {
    SuiteReport {
        name,
        cases,
        tolerance,
        max_error: worst.0,
        worst_case: worst.1,
        passed: worst.0 <= tolerance,
    }
}

/// Fast simulator vs dense oracle on random circuits with n ∈ {2,3,4}, L ∈ {1,2}.
pub fn oracle_suite(seed: u64, cases: usize) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0, String::from("-"));
    for case in 0..cases {
        let n = 2 + case % 3;
        let layers = 1 + (case / 3) % 2;
        let spec = QuantumLayerSpec::new(n, layers).expect("valid spec");
        let params = QuantumLayerParams::random(&spec, &mut rng);
        let inputs: Vec<f64> = (0..n).map(|_| rng.random_range(-2.0 * PI..2.0 * PI)).collect();
        let fast = quantum_forward(&inputs, &params, &spec).expect("valid shapes");
        let dense = dense_forward_oracle(&inputs, &params.weights);
        for (q, (a, b)) in fast.iter().zip(&dense).enumerate() {
            track(&mut worst, (a - b).abs(), || format!("case {case} (n={n}, L={layers}) output {q}"));
        }
    }
    finish("quantum oracle equivalence", cases, 1e-10, worst)
}

/// Parameter-shift Jacobian vs central differences (h = 1e-5).
pub fn parameter_shift_suite(seed: u64, cases: usize, corrupt: bool) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0, String::from("-"));
    for case in 0..cases {
        let n = 2 + case % 3;
        let layers = 1 + (case / 3) % 2;
        let spec = QuantumLayerSpec::new(n, layers).expect("valid spec");
        let params = QuantumLayerParams::random(&spec, &mut rng);
        let inputs: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
        let mut exact = quantum_gradients(&inputs, &params, &spec).expect("valid shapes");
        if corrupt {
            exact.d_inputs[0][0] += 1e-3;
        }
        let numeric = finite_difference_jacobian(&inputs, &params, &spec, 1e-5);
        for i in 0..n {
            for j in 0..n {
                track(&mut worst, (exact.d_inputs[i][j] - numeric.d_inputs[i][j]).abs(), || {
                    format!("case {case} d out{j}/d input{i}")
                });
            }
        }
        for l in 0..layers {
            for i in 0..n {
                for j in 0..n {
                    let err = (exact.d_weights[l][i][j] - numeric.d_weights[l][i][j]).abs();
                    track(&mut worst, err, || format!("case {case} d out{j}/d weight[{l}][{i}]"));
                }
            }
        }
    }
    finish("parameter-shift exactness", cases, 1e-6, worst)
}

/// Backprop through the full hybrid-4q stack vs central differences of the
/// BCE loss (h = 1e-4), relative error on coordinates with |g| > 1e-6.
pub fn hybrid_gradient_suite(seed: u64, draws: usize, corrupt: bool) -> SuiteReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = (0.0, String::from("-"));
    let config = HybridModelConfig::hybrid(4);
    let h = 1e-4;
    for draw in 0..draws {
        let model = build_model(&config, rng.random()).expect("valid config");
        let features: Vec<f64> = (0..6).map(|_| rng.random_range(0.0..1.0)).collect();
        let label = f64::from(rng.random_bool(0.5));
        let (_, mut grad) = model.loss_and_gradient(&features, label).expect("valid input");
        if corrupt {
            grad.iter_mut().for_each(|g| *g *= 1.01);
        }
        let base = model.params();
        let mut probe = model.clone();
        let mut params = base.clone();
        for k in 0..base.len() {
            if grad[k].abs() <= 1e-6 {
                continue;
            }
            params[k] = base[k] + h;
            probe.set_params(&params).expect("same shape");
            let plus = probe.loss(&features, label).expect("valid input");
            params[k] = base[k] - h;
            probe.set_params(&params).expect("same shape");
            let minus = probe.loss(&features, label).expect("valid input");
            params[k] = base[k];
            let numeric = (plus - minus) / (2.0 * h);
            let rel = (grad[k] - numeric).abs() / grad[k].abs();
            track(&mut worst, rel, || format!("draw {draw} param {k}: backprop {} vs numeric {numeric}", grad[k]));
        }
    }
    finish("hybrid end-to-end gradient", draws, 1e-3, worst)
}

/// All three suites at their acceptance sizes.
pub fn run_gradcheck(seed: u64, corrupt: bool) -> Vec<SuiteReport> {
    vec![
        oracle_suite(seed, 120),
        parameter_shift_suite(seed.wrapping_add(1), 60, corrupt),
        hybrid_gradient_suite(seed.wrapping_add(2), 20, corrupt),
    ]
}
