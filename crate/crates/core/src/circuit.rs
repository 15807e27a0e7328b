//! The variational classifier: tensor-product encoding of features, a stack of
//! entangler / parametric-rotation layers, and Pauli-Z read-out.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Deref, DerefMut, Range};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::state::{Axis, Gate1Q, PauliObservable, StateVector, MAX_QUBITS};

/// Classification task; fixes the digit set and the number of read-out qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Task {
    Binary,
    Ternary,
}

impl Task {
    pub fn classes(self) -> usize {
        match self {
            Task::Binary => 2,
            Task::Ternary => 3,
        }
    }

    /// Qubits whose `⟨Z⟩` feed the classification head.
    pub fn measured_qubits(self) -> usize {
        match self {
            Task::Binary => 1,
            Task::Ternary => 3,
        }
    }

    pub fn digits(self) -> &'static [u8] {
        match self {
            Task::Binary => &[2, 5],
            Task::Ternary => &[1, 3, 7],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Task::Binary => "binary",
            Task::Ternary => "ternary",
        }
    }
}

/// A trainable rotation in a parametric layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamGate {
    pub axis: Axis,
    pub qubit: usize,
}

impl ParamGate {
    pub fn new(axis: Axis, qubit: usize) -> Self {
        Self { axis, qubit }
    }

    /// Generator `P/2` of the rotation.
    pub fn generator(&self) -> PauliObservable {
        PauliObservable::new(self.axis, self.qubit, 0.5)
    }
}

/// One `V_l W_l` pair: CNOTs first, then rotations on pairwise distinct qubits.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Layer {
    pub entangler: Vec<(usize, usize)>,
    pub gates: Vec<ParamGate>,
}

/// Ordered layers of a circuit. Parameter slots are assigned layer by layer
/// in gate order, so layer `l` owns a contiguous slot range.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CircuitLayout {
    n_qubits: usize,
    depth: usize,
    layers: Vec<Layer>,
    offsets: Vec<usize>,
}

impl CircuitLayout {
    /// Validates and builds a layout. `depth` is the number of repeated
    /// blocks and is recorded for reporting only.
    pub fn new(n_qubits: usize, depth: usize, layers: Vec<Layer>) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount {
                n: n_qubits,
                max: MAX_QUBITS,
            });
        }
        let mut offsets = Vec::with_capacity(layers.len() + 1);
        let mut next = 0;
        for layer in &layers {
            for &(c, t) in &layer.entangler {
                for q in [c, t] {
                    if q >= n_qubits {
                        return Err(Error::QubitOutOfRange { qubit: q, n_qubits });
                    }
                }
                if c == t {
                    return Err(Error::ControlIsTarget(c));
                }
            }
            let mut seen = vec![false; n_qubits];
            for gate in &layer.gates {
                if gate.qubit >= n_qubits {
                    return Err(Error::QubitOutOfRange {
                        qubit: gate.qubit,
                        n_qubits,
                    });
                }
                if core::mem::replace(&mut seen[gate.qubit], true) {
                    return Err(Error::SharedQubit(gate.qubit));
                }
            }
            offsets.push(next);
            next += layer.gates.len();
        }
        offsets.push(next);
        Ok(Self {
            n_qubits,
            depth,
            layers,
            offsets,
        })
    }

    /// The default architecture: each of `depth` blocks is a CNOT ring
    /// `i → i+1 mod U` followed by an `R_X` layer, an `R_Y` layer and an
    /// `R_Z` layer over all qubits, giving `3·depth` parametric layers.
    pub fn standard(n_qubits: usize, depth: usize) -> Result<Self> {
        let ring: Vec<(usize, usize)> = if n_qubits > 1 {
            (0..n_qubits).map(|i| (i, (i + 1) % n_qubits)).collect()
        } else {
            Vec::new()
        };
        let rotations = |axis| (0..n_qubits).map(|q| ParamGate::new(axis, q)).collect();
        let mut layers = Vec::with_capacity(3 * depth);
        for _ in 0..depth {
            layers.push(Layer {
                entangler: ring.clone(),
                gates: rotations(Axis::X),
            });
            layers.push(Layer {
                entangler: Vec::new(),
                gates: rotations(Axis::Y),
            });
            layers.push(Layer {
                entangler: Vec::new(),
                gates: rotations(Axis::Z),
            });
        }
        Self::new(n_qubits, depth, layers)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn param_count(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    /// Slot range of the 0-based layer `index`.
    pub fn layer_slots(&self, index: usize) -> Range<usize> {
        self.offsets[index]..self.offsets[index + 1]
    }

    /// Layer index and gate position owning `slot`.
    pub fn slot_owner(&self, slot: usize) -> Option<(usize, usize)> {
        if slot >= self.param_count() {
            return None;
        }
        let layer = self.offsets.partition_point(|&o| o <= slot) - 1;
        Some((layer, slot - self.offsets[layer]))
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                what: "parameter vector",
                expected: self.param_count(),
                found: params.len(),
            });
        }
        Ok(())
    }

    fn check_features(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_qubits {
            return Err(Error::DimensionMismatch {
                what: "feature vector",
                expected: self.n_qubits,
                found: x.len(),
            });
        }
        Ok(())
    }

    pub(crate) fn apply_entangler(&self, layer: usize, state: &mut StateVector) -> Result<()> {
        for &(c, t) in &self.layers[layer].entangler {
            state.apply_cnot(c, t)?;
        }
        Ok(())
    }

    pub(crate) fn apply_rotations(&self, layer: usize, params: &[f64], state: &mut StateVector) -> Result<()> {
        let base = self.offsets[layer];
        for (k, gate) in self.layers[layer].gates.iter().enumerate() {
            state.apply_1q(&Gate1Q::rotation(gate.axis, params[base + k], gate.qubit)?)?;
        }
        Ok(())
    }

    /// `V_L W_L ⋯ V_1 W_1 |x⟩`.
    pub fn final_state(&self, params: &[f64], x: &[f64]) -> Result<StateVector> {
        self.check_params(params)?;
        self.check_features(x)?;
        let mut state = tpe_encode(x)?;
        for layer in 0..self.layers.len() {
            self.apply_entangler(layer, &mut state)?;
            self.apply_rotations(layer, params, &mut state)?;
        }
        Ok(state)
    }

    /// State entering the rotations of the 1-based layer `l`: everything up
    /// to and including `W_l`, but not `V_l`.
    pub fn layer_state(&self, params: &[f64], x: &[f64], l: usize) -> Result<StateVector> {
        let layers = self.layers.len();
        if l == 0 || l > layers {
            return Err(Error::LayerOutOfRange { layer: l, layers });
        }
        self.check_params(params)?;
        self.check_features(x)?;
        let mut state = tpe_encode(x)?;
        for layer in 0..l {
            self.apply_entangler(layer, &mut state)?;
            if layer + 1 < l {
                self.apply_rotations(layer, params, &mut state)?;
            }
        }
        Ok(state)
    }

    /// Every [`layer_state`](Self::layer_state) from one forward sweep.
    pub fn layer_states(&self, params: &[f64], x: &[f64]) -> Result<Vec<StateVector>> {
        self.check_params(params)?;
        self.check_features(x)?;
        let mut state = tpe_encode(x)?;
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in 0..self.layers.len() {
            self.apply_entangler(layer, &mut state)?;
            out.push(state.clone());
            self.apply_rotations(layer, params, &mut state)?;
        }
        Ok(out)
    }

    pub fn forward(&self, params: &[f64], x: &[f64], task: Task) -> Result<Readout> {
        if task.measured_qubits() > self.n_qubits {
            return Err(Error::Config(alloc::format!(
                "{} task needs {} read-out qubits, circuit has {}",
                task.name(),
                task.measured_qubits(),
                self.n_qubits
            )));
        }
        let expectations = self.final_state(params, x)?.z_expectations();
        let class_scores = class_scores(&expectations, task)?;
        Ok(Readout {
            expectations,
            class_scores,
        })
    }
}

/// Trainable angles in radians, one per parameter slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamVector(pub Vec<f64>);

impl ParamVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Angles drawn uniformly from `[−scale, scale)` with a seeded ChaCha8
    /// stream.
    pub fn random(len: usize, scale: f64, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self((0..len).map(|_| scale * (2.0 * rng.gen::<f64>() - 1.0)).collect())
    }

    /// Copy with every angle wrapped into `(−2π, 2π]`; for reporting only.
    pub fn canonicalized(&self) -> Self {
        let two_pi = 2.0 * PI;
        Self(self.0.iter().map(|&v| libm::fmod(v, two_pi)).collect())
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for ParamVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Readout {
    /// `⟨Z_u⟩` for every qubit.
    pub expectations: Vec<f64>,
    pub class_scores: Vec<f64>,
}

impl Readout {
    /// Index of the largest class score; ties go to the lower index.
    pub fn predicted_class(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.class_scores.iter().enumerate() {
            if p > self.class_scores[best] {
                best = i;
            }
        }
        best
    }
}

/// Maps `x ∈ [0,1]^U` to `⊗_i [cos(πx_i/2), sin(πx_i/2)]ᵀ` by applying
/// `R_Y(πx_i)` to each qubit of `|0…0⟩`.
pub fn tpe_encode(x: &[f64]) -> Result<StateVector> {
    for (index, &value) in x.iter().enumerate() {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::FeatureOutOfDomain { index, value });
        }
    }
    let mut state = StateVector::zero(x.len())?;
    for (q, &value) in x.iter().enumerate() {
        state.apply_1q(&Gate1Q::rotation(Axis::Y, PI * value, q)?)?;
    }
    Ok(state)
}

/// Binary: `p₀ = (1 + ⟨Z₀⟩)/2`, `p₁ = 1 − p₀`. Ternary: softmax of
/// `(⟨Z₀⟩, ⟨Z₁⟩, ⟨Z₂⟩)`.
pub fn class_scores(expectations: &[f64], task: Task) -> Result<Vec<f64>> {
    let needed = task.measured_qubits();
    if expectations.len() < needed {
        return Err(Error::DimensionMismatch {
            what: "read-out expectations",
            expected: needed,
            found: expectations.len(),
        });
    }
    Ok(match task {
        Task::Binary => {
            let p0 = (1.0 + expectations[0]) / 2.0;
            vec![p0, 1.0 - p0]
        }
        Task::Ternary => softmax(&expectations[..3]),
    })
}

pub(crate) fn softmax(z: &[f64]) -> Vec<f64> {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = z.iter().map(|&v| libm::exp(v - max)).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn tpe_examples() {
        let s = tpe_encode(&[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(s, StateVector::zero(3).unwrap());

        let s = tpe_encode(&[1.0, 1.0]).unwrap();
        assert!((s.amplitudes()[3].re - 1.0).abs() < 1e-15);
        assert!(s.amplitudes()[..3].iter().all(|a| a.norm() < 1e-15));

        let s = tpe_encode(&[0.5]).unwrap();
        for a in s.amplitudes() {
            assert!((a.re - FRAC_1_SQRT_2).abs() < 1e-15 && a.im == 0.0);
        }
    }

    #[test]
    fn tpe_rejects_out_of_domain() {
        assert_eq!(
            tpe_encode(&[0.2, 1.5]),
            Err(Error::FeatureOutOfDomain { index: 1, value: 1.5 })
        );
        assert!(tpe_encode(&[-1e-9]).is_err());
        assert!(tpe_encode(&[f64::NAN]).is_err());
    }

    #[test]
    fn standard_layout_structure() {
        let layout = CircuitLayout::standard(4, 2).unwrap();
        assert_eq!(layout.layers().len(), 6);
        assert_eq!(layout.param_count(), 24);
        assert_eq!(layout.layers()[0].entangler, vec![(0, 1), (1, 2), (2, 3), (3, 0)]);
        assert!(layout.layers()[1].entangler.is_empty());
        assert_eq!(layout.layer_slots(2), 8..12);
        assert_eq!(layout.slot_owner(9), Some((2, 1)));
        assert_eq!(layout.slot_owner(24), None);
        assert_eq!(CircuitLayout::standard(3, 0).unwrap().param_count(), 0);
    }

    #[test]
    fn layout_rejects_shared_qubit() {
        let layer = Layer {
            entangler: vec![],
            gates: vec![ParamGate::new(Axis::X, 1), ParamGate::new(Axis::Y, 1)],
        };
        assert_eq!(CircuitLayout::new(2, 1, vec![layer]), Err(Error::SharedQubit(1)));
        let bad = Layer {
            entangler: vec![(0, 0)],
            gates: vec![],
        };
        assert!(CircuitLayout::new(2, 1, vec![bad]).is_err());
    }

    #[test]
    fn forward_identity_rotations_on_zero_input() {
        let ring: Vec<_> = (0..3).map(|i| (i, (i + 1) % 3)).collect();
        let layers = (0..2)
            .map(|_| Layer {
                entangler: ring.clone(),
                gates: (0..3).map(|q| ParamGate::new(Axis::Y, q)).collect(),
            })
            .collect();
        let layout = CircuitLayout::new(3, 2, layers).unwrap();
        let r = layout
            .forward(&vec![0.0; layout.param_count()], &[0.0; 3], Task::Ternary)
            .unwrap();
        assert_eq!(r.expectations, vec![1.0; 3]);
    }

    #[test]
    fn forward_without_circuit_reads_encoding() {
        let layout = CircuitLayout::standard(3, 0).unwrap();
        let x = [0.1, 0.6, 0.93];
        let r = layout.forward(&[], &x, Task::Ternary).unwrap();
        for (z, xi) in r.expectations.iter().zip(x) {
            assert!((z - libm::cos(PI * xi)).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_dimension_errors() {
        let layout = CircuitLayout::standard(2, 1).unwrap();
        assert!(matches!(
            layout.forward(&[0.0; 5], &[0.0; 2], Task::Binary),
            Err(Error::DimensionMismatch {
                expected: 6,
                found: 5,
                ..
            })
        ));
        assert!(layout.forward(&[0.0; 6], &[0.0; 3], Task::Binary).is_err());
        assert!(layout.forward(&[0.0; 6], &[0.0; 2], Task::Ternary).is_err());
    }

    #[test]
    fn layer_state_examples() {
        let layout = CircuitLayout::standard(3, 1).unwrap();
        let params = ParamVector::random(layout.param_count(), 1.0, 3);
        let x = [0.0, 0.0, 0.0];
        // W_1 is a CNOT ring, which fixes |000⟩.
        assert_eq!(
            layout.layer_state(&params, &x, 1).unwrap(),
            StateVector::zero(3).unwrap()
        );
        assert!(matches!(
            layout.layer_state(&params, &x, 4),
            Err(Error::LayerOutOfRange { layer: 4, layers: 3 })
        ));
        assert!(layout.layer_state(&params, &x, 0).is_err());

        let x = [0.3, 0.8, 0.5];
        let all = layout.layer_states(&params, &x).unwrap();
        for l in 1..=3 {
            assert_eq!(all[l - 1], layout.layer_state(&params, &x, l).unwrap());
        }
    }

    #[test]
    fn class_score_examples() {
        assert_eq!(class_scores(&[1.0], Task::Binary).unwrap(), vec![1.0, 0.0]);
        let p = class_scores(&[0.4, 0.4, 0.4, -1.0], Task::Ternary).unwrap();
        for v in &p {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        assert!(class_scores(&[0.1, 0.2], Task::Ternary).is_err());
    }

    #[test]
    fn canonicalized_range() {
        let p = ParamVector(vec![7.0, -7.0, 2.0 * PI, -2.0 * PI, 0.5]);
        let c = p.canonicalized();
        for v in c.iter() {
            assert!(*v > -2.0 * PI && *v <= 2.0 * PI);
        }
        assert_eq!(c[4], 0.5);
    }
}
