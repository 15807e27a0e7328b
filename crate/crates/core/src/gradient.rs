//! Cross-entropy loss on the read-out head and its gradient with respect to
//! the circuit parameters.
//!
//! [`GradientMethod::ParameterShift`] is the reference: for rotations
//! `exp(−iθP/2)` the derivative of any expectation is exactly
//! `[E(θ + π/2) − E(θ − π/2)] / 2`. [`GradientMethod::Adjoint`] obtains the
//! same numbers from one forward and one backward sweep of the statevector.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::FRAC_PI_2;
use core::ops::{Deref, DerefMut};

use crate::circuit::{softmax, CircuitLayout, Readout, Task};
use crate::dataset::FeatureSample;
use crate::error::{Error, Result};
use crate::state::{rotation_matrix, StateVector};

/// Probability floor used inside the logarithm.
pub const DEFAULT_PROBABILITY_FLOOR: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    BinaryCrossEntropy,
    CategoricalCrossEntropy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub kind: LossKind,
    /// Floor applied to the true-class probability; must lie in `(0, 1e-3]`.
    pub eps: f64,
}

impl LossSpec {
    pub fn new(kind: LossKind, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1e-3) {
            return Err(Error::Config(alloc::format!(
                "probability floor {eps} outside (0, 1e-3]"
            )));
        }
        Ok(Self { kind, eps })
    }

    pub fn for_task(task: Task) -> Self {
        let kind = match task {
            Task::Binary => LossKind::BinaryCrossEntropy,
            Task::Ternary => LossKind::CategoricalCrossEntropy,
        };
        Self {
            kind,
            eps: DEFAULT_PROBABILITY_FLOOR,
        }
    }

    pub fn task(&self) -> Task {
        match self.kind {
            LossKind::BinaryCrossEntropy => Task::Binary,
            LossKind::CategoricalCrossEntropy => Task::Ternary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GradientMethod {
    #[default]
    ParameterShift,
    Adjoint,
}

/// `∇L(θ)`, one entry per parameter slot.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl Deref for GradientVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for GradientVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for GradientVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

fn check_label(label: usize, task: Task) -> Result<()> {
    if label >= task.classes() {
        return Err(Error::LabelOutOfRange {
            label,
            classes: task.classes(),
        });
    }
    Ok(())
}

/// `−ln max(p_label, eps)` on the readout's class scores.
pub fn loss(readout: &Readout, label: usize, spec: &LossSpec) -> Result<f64> {
    let task = spec.task();
    check_label(label, task)?;
    let p = *readout.class_scores.get(label).ok_or(Error::DimensionMismatch {
        what: "class scores",
        expected: task.classes(),
        found: readout.class_scores.len(),
    })?;
    Ok(-libm::log(p.clamp(spec.eps, 1.0)))
}

/// Loss and `∂L/∂⟨Z_u⟩` for every qubit `u`, computed from raw expectations.
pub fn loss_and_readout_grad(expectations: &[f64], label: usize, spec: &LossSpec) -> Result<(f64, Vec<f64>)> {
    let task = spec.task();
    check_label(label, task)?;
    if expectations.len() < task.measured_qubits() {
        return Err(Error::DimensionMismatch {
            what: "read-out expectations",
            expected: task.measured_qubits(),
            found: expectations.len(),
        });
    }
    let mut dz = vec![0.0; expectations.len()];
    let loss = match task {
        Task::Binary => {
            let p0 = (1.0 + expectations[0]) / 2.0;
            let (p, sign) = if label == 0 { (p0, 1.0) } else { (1.0 - p0, -1.0) };
            let q = p.clamp(spec.eps, 1.0);
            if p >= spec.eps {
                dz[0] = -sign / (2.0 * q);
            }
            -libm::log(q)
        }
        Task::Ternary => {
            let p = softmax(&expectations[..3]);
            let q = p[label].clamp(spec.eps, 1.0);
            if p[label] >= spec.eps {
                for u in 0..3 {
                    dz[u] = p[u] - if u == label { 1.0 } else { 0.0 };
                }
            }
            -libm::log(q)
        }
    };
    Ok((loss, dz))
}

impl CircuitLayout {
    /// Applies layers `from..` (entangler of `from` excluded) starting with
    /// the rotations of layer `from`.
    fn finish_from(&self, from: usize, params: &[f64], mut state: StateVector) -> Result<StateVector> {
        self.apply_rotations(from, params, &mut state)?;
        for layer in from + 1..self.layers().len() {
            self.apply_entangler(layer, &mut state)?;
            self.apply_rotations(layer, params, &mut state)?;
        }
        Ok(state)
    }
}

fn check_slot(layout: &CircuitLayout, slot: usize) -> Result<(usize, usize)> {
    layout.slot_owner(slot).ok_or(Error::DimensionMismatch {
        what: "parameter slot",
        expected: layout.param_count(),
        found: slot,
    })
}

/// `∂⟨Z_u⟩/∂θ_slot` for every qubit `u` by the two-point shift rule.
pub fn expectation_shift_grad(layout: &CircuitLayout, params: &[f64], x: &[f64], slot: usize) -> Result<Vec<f64>> {
    let (layer, _) = check_slot(layout, slot)?;
    let entry = layout.layer_state(params, x, layer + 1)?;
    shifted_difference(layout, params, layer, slot, &entry)
}

fn shifted_difference(
    layout: &CircuitLayout,
    params: &[f64],
    layer: usize,
    slot: usize,
    entry: &StateVector,
) -> Result<Vec<f64>> {
    let mut shifted = params.to_vec();
    shifted[slot] = params[slot] + FRAC_PI_2;
    let plus = layout.finish_from(layer, &shifted, entry.clone())?.z_expectations();
    shifted[slot] = params[slot] - FRAC_PI_2;
    let minus = layout.finish_from(layer, &shifted, entry.clone())?.z_expectations();
    Ok(plus.iter().zip(&minus).map(|(p, m)| (p - m) / 2.0).collect())
}

/// Loss of one sample and its gradient.
pub fn loss_grad(
    layout: &CircuitLayout,
    params: &[f64],
    x: &[f64],
    label: usize,
    spec: &LossSpec,
    method: GradientMethod,
) -> Result<(f64, GradientVector)> {
    match method {
        GradientMethod::ParameterShift => shift_loss_grad(layout, params, x, label, spec),
        GradientMethod::Adjoint => adjoint_loss_grad(layout, params, x, label, spec),
    }
}

fn shift_loss_grad(
    layout: &CircuitLayout,
    params: &[f64],
    x: &[f64],
    label: usize,
    spec: &LossSpec,
) -> Result<(f64, GradientVector)> {
    let entries = layout.layer_states(params, x)?;
    let final_z = match entries.last() {
        Some(last) => layout
            .finish_from(entries.len() - 1, params, last.clone())?
            .z_expectations(),
        None => crate::circuit::tpe_encode(x)?.z_expectations(),
    };
    let (value, dz) = loss_and_readout_grad(&final_z, label, spec)?;
    let mut grad = GradientVector::zeros(layout.param_count());
    for (layer, entry) in entries.iter().enumerate() {
        for slot in layout.layer_slots(layer) {
            let dexp = shifted_difference(layout, params, layer, slot, entry)?;
            grad[slot] = dz.iter().zip(&dexp).map(|(c, d)| c * d).sum();
        }
    }
    Ok((value, grad))
}

fn adjoint_loss_grad(
    layout: &CircuitLayout,
    params: &[f64],
    x: &[f64],
    label: usize,
    spec: &LossSpec,
) -> Result<(f64, GradientVector)> {
    let mut psi = layout.final_state(params, x)?;
    let n = psi.n_qubits();
    let (value, dz) = loss_and_readout_grad(&psi.z_expectations(), label, spec)?;

    // λ = O ψ with O = Σ_u (∂L/∂⟨Z_u⟩) Z_u, diagonal in the computational basis.
    let weights: Vec<f64> = (0..1usize << n)
        .map(|i| {
            dz.iter()
                .enumerate()
                .map(|(q, c)| if i & (1 << (n - 1 - q)) == 0 { *c } else { -*c })
                .sum()
        })
        .collect();
    let lambda_amps = psi.amplitudes().iter().zip(&weights).map(|(a, w)| a * w).collect();
    let mut lambda = StateVector::from_unchecked(lambda_amps, n);

    let mut grad = GradientVector::zeros(layout.param_count());
    for layer in (0..layout.layers().len()).rev() {
        let slots = layout.layer_slots(layer);
        let gates = &layout.layers()[layer].gates;
        for (k, gate) in gates.iter().enumerate().rev() {
            let slot = slots.start + k;
            let mut p_psi = psi.clone();
            p_psi.apply_pauli(gate.axis, gate.qubit)?;
            grad[slot] = lambda.inner(&p_psi).im;
            let undo = rotation_matrix(gate.axis, -params[slot]);
            psi.apply_matrix(&undo, gate.qubit)?;
            lambda.apply_matrix(&undo, gate.qubit)?;
        }
        for &(c, t) in layout.layers()[layer].entangler.iter().rev() {
            psi.apply_cnot(c, t)?;
            lambda.apply_cnot(c, t)?;
        }
    }
    Ok((value, grad))
}

/// Mean loss and mean gradient over `batch`, accumulated in sample order.
pub fn batch_loss_grad(
    layout: &CircuitLayout,
    params: &[f64],
    batch: &[FeatureSample],
    spec: &LossSpec,
    method: GradientMethod,
) -> Result<(f64, GradientVector)> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut total = 0.0;
    let mut grad = GradientVector::zeros(layout.param_count());
    for sample in batch {
        let (value, g) = loss_grad(layout, params, &sample.features, sample.class_index, spec, method)?;
        total += value;
        for (acc, v) in grad.iter_mut().zip(g.iter()) {
            *acc += v;
        }
    }
    let n = batch.len() as f64;
    for v in grad.iter_mut() {
        *v /= n;
    }
    if !total.is_finite() || !grad.is_finite() {
        return Err(Error::NonFinite("batch gradient"));
    }
    Ok((total / n, grad))
}

/// Mean loss over `batch` without gradients.
pub fn batch_loss(layout: &CircuitLayout, params: &[f64], batch: &[FeatureSample], spec: &LossSpec) -> Result<f64> {
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let task = spec.task();
    let mut total = 0.0;
    for sample in batch {
        total += loss(
            &layout.forward(params, &sample.features, task)?,
            sample.class_index,
            spec,
        )?;
    }
    if !total.is_finite() {
        return Err(Error::NonFinite("batch loss"));
    }
    Ok(total / batch.len() as f64)
}
