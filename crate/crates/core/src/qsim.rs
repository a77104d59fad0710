//! Exact statevector simulation of the quantum layer.
//!
//! The circuit is fixed: an RX angle embedding of the inputs on a fresh
//! `|0...0⟩` register, followed by basic entangler layers (one trainable RX per
//! qubit, then a CNOT ring), read out as per-qubit Pauli-Z expectations.
//!
//! Qubit 0 is the most significant bit of the basis-state index, so on two
//! qubits `|10⟩` (qubit 0 set) is amplitude index 2.

use std::f64::consts::{FRAC_PI_2, TAU};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Registers wider than this are rejected; the layer is meant for a handful of qubits.
pub const MAX_QUBITS: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Fresh `|0...0⟩` register.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::argument(format!(
                "register must hold 1..={MAX_QUBITS} qubits, got {n_qubits}"
            )));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self {
            n_qubits,
            amplitudes,
        })
    }

    /// Computational basis state `|index⟩` (qubit 0 is the most significant bit).
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        let mut state = Self::zero(n_qubits)?;
        if index >= state.amplitudes.len() {
            return Err(Error::argument(format!(
                "basis index {index} out of range for {n_qubits} qubits"
            )));
        }
        state.amplitudes[0] = Complex64::new(0.0, 0.0);
        state.amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(state)
    }

    /// Wraps raw amplitudes. The length must be a power of two; the vector is
    /// renormalized so callers can pass unnormalized draws.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::argument(format!(
                "amplitude count {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::argument(format!("{n_qubits} qubits exceeds {MAX_QUBITS}")));
        }
        let norm = amplitudes.iter().map(Complex64::norm_sqr).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::argument("amplitudes must have a finite nonzero norm"));
        }
        Ok(Self {
            n_qubits,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    /// Σ|amplitude|².
    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(Complex64::norm_sqr).sum()
    }

    fn mask(&self, qubit: usize) -> Result<usize> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitIndex {
                index: qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(1 << (self.n_qubits - 1 - qubit))
    }

    /// RX(θ) = [[cos θ/2, −i sin θ/2], [−i sin θ/2, cos θ/2]] on `qubit`.
    pub fn apply_rx(&mut self, qubit: usize, angle: f64) -> Result<()> {
        let mask = self.mask(qubit)?;
        let (s, c) = (angle / 2.0).sin_cos();
        let minus_i_s = Complex64::new(0.0, -s);
        for i in 0..self.amplitudes.len() {
            if i & mask != 0 {
                continue;
            }
            let a = self.amplitudes[i];
            let b = self.amplitudes[i | mask];
            self.amplitudes[i] = a * c + b * minus_i_s;
            self.amplitudes[i | mask] = a * minus_i_s + b * c;
        }
        Ok(())
    }

    /// Flips `target` on every basis state whose `control` bit is set.
    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        let control_mask = self.mask(control)?;
        let target_mask = self.mask(target)?;
        if control == target {
            return Err(Error::argument(format!(
                "CNOT control and target must differ (both {control})"
            )));
        }
        for i in 0..self.amplitudes.len() {
            if i & control_mask != 0 && i & target_mask == 0 {
                self.amplitudes.swap(i, i | target_mask);
            }
        }
        Ok(())
    }

    /// RX(inputs[i]) on qubit i, ascending.
    pub fn angle_embedding(&mut self, inputs: &[f64]) -> Result<()> {
        self.check_len("embedding inputs", inputs.len())?;
        for (qubit, &angle) in inputs.iter().enumerate() {
            self.apply_rx(qubit, angle)?;
        }
        Ok(())
    }

    /// One RX per qubit, then the CNOT ring (a single 0→1 CNOT on two qubits).
    pub fn basic_entangler_layer(&mut self, layer_weights: &[f64]) -> Result<()> {
        self.check_len("entangler weights", layer_weights.len())?;
        for (qubit, &angle) in layer_weights.iter().enumerate() {
            self.apply_rx(qubit, angle)?;
        }
        for (control, target) in entangler_pairs(self.n_qubits) {
            self.apply_cnot(control, target)?;
        }
        Ok(())
    }

    /// ⟨Z_i⟩ for every qubit.
    pub fn z_expectations(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n_qubits];
        for (index, amp) in self.amplitudes.iter().enumerate() {
            let p = amp.norm_sqr();
            for (qubit, z) in out.iter_mut().enumerate() {
                if index & (1 << (self.n_qubits - 1 - qubit)) == 0 {
                    *z += p;
                } else {
                    *z -= p;
                }
            }
        }
        out
    }

    fn check_len(&self, what: &str, len: usize) -> Result<()> {
        if len != self.n_qubits {
            return Err(Error::argument(format!(
                "{what} has length {len}, register has {} qubits",
                self.n_qubits
            )));
        }
        Ok(())
    }
}

/// CNOT (control, target) pairs of one entangler layer.
pub fn entangler_pairs(n_qubits: usize) -> Vec<(usize, usize)> {
    match n_qubits {
        0 | 1 => Vec::new(),
        2 => vec![(0, 1)],
        n => (0..n).map(|q| (q, (q + 1) % n)).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantumLayerSpec {
    pub n_qubits: usize,
    pub n_entangler_layers: usize,
}

impl QuantumLayerSpec {
    pub fn new(n_qubits: usize, n_entangler_layers: usize) -> Result<Self> {
        let spec = Self {
            n_qubits,
            n_entangler_layers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_qubits == 0 || self.n_qubits > MAX_QUBITS {
            return Err(Error::config(format!(
                "n_qubits must be in 1..={MAX_QUBITS}, got {}",
                self.n_qubits
            )));
        }
        if self.n_entangler_layers == 0 {
            return Err(Error::config("n_entangler_layers must be at least 1"));
        }
        Ok(())
    }

    pub fn n_weights(&self) -> usize {
        self.n_qubits * self.n_entangler_layers
    }
}

/// Entangler rotation angles, `weights[layer][qubit]`, in radians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumLayerParams {
    pub weights: Vec<Vec<f64>>,
}

impl QuantumLayerParams {
    pub fn zeros(spec: &QuantumLayerSpec) -> Self {
        Self {
            weights: vec![vec![0.0; spec.n_qubits]; spec.n_entangler_layers],
        }
    }

    /// Angles drawn uniformly from [0, 2π).
    pub fn random<R: Rng + ?Sized>(spec: &QuantumLayerSpec, rng: &mut R) -> Self {
        let weights = (0..spec.n_entangler_layers)
            .map(|_| (0..spec.n_qubits).map(|_| rng.random_range(0.0..TAU)).collect())
            .collect();
        Self { weights }
    }

    pub fn check_shape(&self, spec: &QuantumLayerSpec) -> Result<()> {
        let ok = self.weights.len() == spec.n_entangler_layers
            && self.weights.iter().all(|row| row.len() == spec.n_qubits);
        if !ok {
            return Err(Error::argument(format!(
                "quantum weights do not match a {}-layer {}-qubit spec",
                spec.n_entangler_layers, spec.n_qubits
            )));
        }
        Ok(())
    }
}

/// Jacobian of the layer outputs.
///
/// `d_inputs[i][j]` is ∂output_j/∂input_i and `d_weights[l][i][j]` is
/// ∂output_j/∂weights[l][i].
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumGradient {
    pub d_inputs: Vec<Vec<f64>>,
    pub d_weights: Vec<Vec<Vec<f64>>>,
}

fn check_shapes(inputs: &[f64], params: &QuantumLayerParams, spec: &QuantumLayerSpec) -> Result<()> {
    spec.validate().map_err(|e| Error::argument(e.to_string()))?;
    params.check_shape(spec)?;
    if inputs.len() != spec.n_qubits {
        return Err(Error::argument(format!(
            "quantum layer expects {} inputs, got {}",
            spec.n_qubits,
            inputs.len()
        )));
    }
    Ok(())
}

fn run_circuit(n_qubits: usize, inputs: &[f64], weights: &[Vec<f64>]) -> Vec<f64> {
    // Shapes are validated by callers; the gate calls cannot fail.
    let mut state = StateVector::zero(n_qubits).expect("validated qubit count");
    state.angle_embedding(inputs).expect("validated input length");
    for layer in weights {
        state.basic_entangler_layer(layer).expect("validated layer width");
    }
    state.z_expectations()
}

/// Embedding, entangler layers and Z readout on a fresh register.
pub fn quantum_forward(
    inputs: &[f64],
    params: &QuantumLayerParams,
    spec: &QuantumLayerSpec,
) -> Result<Vec<f64>> {
    check_shapes(inputs, params, spec)?;
    Ok(run_circuit(spec.n_qubits, inputs, &params.weights))
}

/// Exact Jacobian by the parameter-shift rule,
/// ∂f/∂θ = (f(θ + π/2) − f(θ − π/2)) / 2, applied to every embedding angle
/// and every entangler weight.
pub fn quantum_gradients(
    inputs: &[f64],
    params: &QuantumLayerParams,
    spec: &QuantumLayerSpec,
) -> Result<QuantumGradient> {
    check_shapes(inputs, params, spec)?;
    let n = spec.n_qubits;
    let shift_diff = |plus: Vec<f64>, minus: Vec<f64>| -> Vec<f64> {
        plus.iter().zip(&minus).map(|(p, m)| (p - m) / 2.0).collect()
    };

    let mut shifted = inputs.to_vec();
    let d_inputs = (0..n)
        .map(|i| {
            let base = shifted[i];
            shifted[i] = base + FRAC_PI_2;
            let plus = run_circuit(n, &shifted, &params.weights);
            shifted[i] = base - FRAC_PI_2;
            let minus = run_circuit(n, &shifted, &params.weights);
            shifted[i] = base;
            shift_diff(plus, minus)
        })
        .collect();

    let mut weights = params.weights.clone();
    let mut d_weights = Vec::with_capacity(spec.n_entangler_layers);
    for l in 0..spec.n_entangler_layers {
        let mut layer = Vec::with_capacity(n);
        for i in 0..n {
            let base = weights[l][i];
            weights[l][i] = base + FRAC_PI_2;
            let plus = run_circuit(n, inputs, &weights);
            weights[l][i] = base - FRAC_PI_2;
            let minus = run_circuit(n, inputs, &weights);
            weights[l][i] = base;
            layer.push(shift_diff(plus, minus));
        }
        d_weights.push(layer);
    }

    Ok(QuantumGradient {
        d_inputs,
        d_weights,
    })
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;

    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::verify;

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
        let amps = (0..1 << n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn rx_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let state = random_state(3, &mut rng);
        let mut rotated = state.clone();
        rotated.apply_rx(1, 0.0).unwrap();
        assert_eq!(rotated, state);
    }

    #[test]
    fn rx_pi_flips_single_qubit() {
        let mut state = StateVector::zero(1).unwrap();
        state.apply_rx(0, PI).unwrap();
        assert_abs_diff_eq!(state.z_expectations()[0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn rx_rejects_bad_qubit() {
        let mut state = StateVector::zero(2).unwrap();
        assert!(matches!(
            state.apply_rx(2, 0.3),
            Err(Error::QubitIndex { index: 2, n_qubits: 2 })
        ));
    }

    #[test]
    fn cnot_truth_table() {
        let mut s = StateVector::basis(2, 0b00).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b00).unwrap());

        // qubit 0 is the high bit
        let mut s = StateVector::basis(2, 0b10).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s, StateVector::basis(2, 0b11).unwrap());
    }

    #[test]
    fn cnot_permutes_superposition() {
        let amps: Vec<Complex64> = [1.0, 2.0, 3.0, 4.0].iter().map(|&r| Complex64::new(r, 0.0)).collect();
        let mut s = StateVector::from_amplitudes(amps).unwrap();
        s.apply_cnot(0, 1).unwrap();
        // |10⟩ <-> |11⟩
        let norm = 30f64.sqrt();
        let expected = [1.0, 2.0, 4.0, 3.0];
        for (a, e) in s.amplitudes().iter().zip(expected) {
            assert_abs_diff_eq!(a.re, e / norm, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(s.norm_sqr(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn cnot_rejects_equal_indices() {
        let mut s = StateVector::zero(3).unwrap();
        assert!(matches!(s.apply_cnot(1, 1), Err(Error::Argument(_))));
    }

    #[test]
    fn embedding_cases() {
        let mut s = StateVector::zero(4).unwrap();
        s.angle_embedding(&[0.0; 4]).unwrap();
        assert_eq!(s, StateVector::zero(4).unwrap());

        let mut s = StateVector::zero(4).unwrap();
        s.angle_embedding(&[PI, 0.0, 0.0, 0.0]).unwrap();
        // -i|1000⟩
        let target = s.amplitudes()[0b1000];
        assert_abs_diff_eq!(target.norm(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(target.im, -1.0, epsilon = 1e-12);

        assert!(s.angle_embedding(&[0.0; 3]).is_err());
    }

    #[test]
    fn entangler_ring_cascade() {
        let mut s = StateVector::zero(4).unwrap();
        s.basic_entangler_layer(&[0.0; 4]).unwrap();
        assert_eq!(s, StateVector::zero(4).unwrap());

        let mut s = StateVector::basis(4, 0b1000).unwrap();
        s.basic_entangler_layer(&[0.0; 4]).unwrap();
        assert_eq!(s, StateVector::basis(4, 0b0111).unwrap());

        assert!(s.basic_entangler_layer(&[0.0; 2]).is_err());
    }

    #[test]
    fn entangler_pairs_shapes() {
        assert_eq!(entangler_pairs(2), vec![(0, 1)]);
        assert_eq!(entangler_pairs(3), vec![(0, 1), (1, 2), (2, 0)]);
        assert!(entangler_pairs(1).is_empty());
    }

    #[test]
    fn z_expectation_cases() {
        assert_eq!(StateVector::zero(4).unwrap().z_expectations(), vec![1.0; 4]);
        assert_eq!(
            StateVector::basis(4, 0b1000).unwrap().z_expectations(),
            vec![-1.0, 1.0, 1.0, 1.0]
        );
        let uniform = StateVector::from_amplitudes(vec![Complex64::new(0.5, 0.0); 4]).unwrap();
        for z in uniform.z_expectations() {
            assert_abs_diff_eq!(z, 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn forward_cases() {
        let spec = QuantumLayerSpec::new(4, 1).unwrap();
        let zeros = QuantumLayerParams::zeros(&spec);
        assert_eq!(quantum_forward(&[0.0; 4], &zeros, &spec).unwrap(), vec![1.0; 4]);
        let out = quantum_forward(&[PI, 0.0, 0.0, 0.0], &zeros, &spec).unwrap();
        for (o, e) in out.iter().zip([1.0, -1.0, -1.0, -1.0]) {
            assert_abs_diff_eq!(*o, e, epsilon = 1e-12);
        }
        assert!(quantum_forward(&[0.0; 3], &zeros, &spec).is_err());
        let wrong = QuantumLayerParams { weights: vec![vec![0.0; 4]; 2] };
        assert!(quantum_forward(&[0.0; 4], &wrong, &spec).is_err());
    }

    #[test]
    fn forward_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for case in 0..120 {
            let n = 2 + case % 3;
            let layers = 1 + case % 2;
            let spec = QuantumLayerSpec::new(n, layers).unwrap();
            let params = QuantumLayerParams::random(&spec, &mut rng);
            let inputs: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
            let fast = quantum_forward(&inputs, &params, &spec).unwrap();
            let dense = verify::dense_forward_oracle(&inputs, &params.weights);
            for (a, b) in fast.iter().zip(&dense) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn single_rx_shift_gradient() {
        // one qubit, no embedding: ⟨Z⟩ = cos θ
        let spec = QuantumLayerSpec::new(1, 1).unwrap();
        let params = QuantumLayerParams { weights: vec![vec![FRAC_PI_2]] };
        let g = quantum_gradients(&[0.0], &params, &spec).unwrap();
        assert_abs_diff_eq!(g.d_weights[0][0][0], -1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(g.d_inputs[0][0], -1.0, epsilon = 1e-12);
    }

    #[test]
    fn gradient_vanishes_at_zero_angles() {
        let spec = QuantumLayerSpec::new(4, 1).unwrap();
        let g = quantum_gradients(&[0.0; 4], &QuantumLayerParams::zeros(&spec), &spec).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(g.d_inputs[i][i], 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn shift_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for case in 0..50 {
            let n = 2 + case % 3;
            let spec = QuantumLayerSpec::new(n, 1 + case % 2).unwrap();
            let params = QuantumLayerParams::random(&spec, &mut rng);
            let inputs: Vec<f64> = (0..n).map(|_| rng.random_range(-PI..PI)).collect();
            let exact = quantum_gradients(&inputs, &params, &spec).unwrap();
            let numeric = verify::finite_difference_jacobian(&inputs, &params, &spec, 1e-5);
            assert!(verify::max_jacobian_error(&exact, &numeric) < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn gates_preserve_norm(seed in any::<u64>(), angle in -10.0f64..10.0, q in 0usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut s = random_state(4, &mut rng);
            s.apply_rx(q, angle).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            s.apply_cnot(q, (q + 1) % 4).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
            s.basic_entangler_layer(&[angle, -angle, 0.5 * angle, 1.0]).unwrap();
            prop_assert!((s.norm_sqr() - 1.0).abs() < 1e-10);
        }

        #[test]
        fn forward_is_periodic_and_bounded(
            inputs in proptest::collection::vec(-10.0f64..10.0, 4),
            weights in proptest::collection::vec(-10.0f64..10.0, 4),
        ) {
            let spec = QuantumLayerSpec::new(4, 1).unwrap();
            let params = QuantumLayerParams { weights: vec![weights] };
            let out = quantum_forward(&inputs, &params, &spec).unwrap();
            let shifted: Vec<f64> = inputs.iter().map(|x| x + TAU).collect();
            let out_shifted = quantum_forward(&shifted, &params, &spec).unwrap();
            for (a, b) in out.iter().zip(&out_shifted) {
                prop_assert!((a - b).abs() < 1e-10);
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(a));
            }
            prop_assert_eq!(out, quantum_forward(&inputs, &params, &spec).unwrap());
        }
    }
}
