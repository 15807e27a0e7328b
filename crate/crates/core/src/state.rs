//! Dense statevector registers, single-qubit gates, CNOT and Pauli expectations.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Largest register the simulator accepts.
pub const MAX_QUBITS: usize = 20;

pub type Matrix2 = [[Complex64; 2]; 2];

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn pauli(self) -> Matrix2 {
        match self {
            Axis::X => [[ZERO, ONE], [ONE, ZERO]],
            Axis::Y => [[ZERO, -I], [I, ZERO]],
            Axis::Z => [[ONE, ZERO], [ZERO, -ONE]],
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Axis::X => 'X',
            Axis::Y => 'Y',
            Axis::Z => 'Z',
        }
    }
}

/// `scale · P_axis` acting on one qubit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliObservable {
    pub axis: Axis,
    pub qubit: usize,
    pub scale: f64,
}

impl PauliObservable {
    pub fn new(axis: Axis, qubit: usize, scale: f64) -> Self {
        Self { axis, qubit, scale }
    }

    /// Unscaled Pauli Z, the read-out observable.
    pub fn z(qubit: usize) -> Self {
        Self::new(Axis::Z, qubit, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    Rx,
    Ry,
    Rz,
    Fixed,
}

/// A single-qubit gate together with its placement and, for rotations, the
/// angle and Hermitian generator.
#[derive(Debug, Clone, PartialEq)]
pub struct Gate1Q {
    pub matrix: Matrix2,
    pub qubit: usize,
    pub kind: GateKind,
    pub angle: Option<f64>,
    pub generator: Option<PauliObservable>,
}

/// `R_P(θ) = exp(−iθP/2)`.
pub fn rotation_matrix(axis: Axis, angle: f64) -> Matrix2 {
    let c = libm::cos(angle / 2.0);
    let s = libm::sin(angle / 2.0);
    match axis {
        Axis::X => [
            [Complex64::new(c, 0.0), Complex64::new(0.0, -s)],
            [Complex64::new(0.0, -s), Complex64::new(c, 0.0)],
        ],
        Axis::Y => [
            [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
            [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
        ],
        Axis::Z => [[Complex64::new(c, -s), ZERO], [ZERO, Complex64::new(c, s)]],
    }
}

impl Gate1Q {
    /// Rotation about `axis` by `angle` radians on `qubit`. The recorded
    /// generator is `P/2`; the sign of the exponent does not enter any
    /// covariance built from it.
    pub fn rotation(axis: Axis, angle: f64, qubit: usize) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::NonFiniteAngle(angle));
        }
        let kind = match axis {
            Axis::X => GateKind::Rx,
            Axis::Y => GateKind::Ry,
            Axis::Z => GateKind::Rz,
        };
        Ok(Self {
            matrix: rotation_matrix(axis, angle),
            qubit,
            kind,
            angle: Some(angle),
            generator: Some(PauliObservable::new(axis, qubit, 0.5)),
        })
    }

    pub fn fixed(matrix: Matrix2, qubit: usize) -> Self {
        Self {
            matrix,
            qubit,
            kind: GateKind::Fixed,
            angle: None,
            generator: None,
        }
    }

    pub fn pauli(axis: Axis, qubit: usize) -> Self {
        Self::fixed(axis.pauli(), qubit)
    }

    /// `max |(G†G − I)_ij|`.
    pub fn unitarity_defect(&self) -> f64 {
        let m = &self.matrix;
        let mut worst: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let mut acc = ZERO;
                for k in 0..2 {
                    acc += m[k][i].conj() * m[k][j];
                }
                if i == j {
                    acc -= ONE;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }
}

/// Amplitudes of an `n_qubits` register; qubit 0 is the most significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// `|0…0⟩`.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::zero_capped(n_qubits, MAX_QUBITS)
    }

    /// `|0…0⟩` with a caller-chosen cap at or below [`MAX_QUBITS`].
    pub fn zero_capped(n_qubits: usize, cap: usize) -> Result<Self> {
        let max = cap.min(MAX_QUBITS);
        if n_qubits == 0 || n_qubits > max {
            return Err(Error::QubitCount { n: n_qubits, max });
        }
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[0] = ONE;
        Ok(Self { n_qubits, amplitudes })
    }

    /// Wraps raw amplitudes. The length must be `2^n` and the norm 1 within
    /// `1e-10`.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::DimensionMismatch {
                what: "statevector amplitudes",
                expected: len.next_power_of_two().max(2),
                found: len,
            });
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount {
                n: n_qubits,
                max: MAX_QUBITS,
            });
        }
        let state = Self { n_qubits, amplitudes };
        let norm = state.norm_sqr();
        if !norm.is_finite() {
            return Err(Error::NonFinite("statevector amplitudes"));
        }
        if (norm - 1.0).abs() > 1e-10 {
            return Err(Error::Config(alloc::format!(
                "amplitudes have squared norm {norm}, expected 1"
            )));
        }
        Ok(state)
    }

    /// Unnormalized buffer of the right length; used for adjoint vectors.
    pub(crate) fn from_unchecked(amplitudes: Vec<Complex64>, n_qubits: usize) -> Self {
        debug_assert_eq!(amplitudes.len(), 1 << n_qubits);
        Self { n_qubits, amplitudes }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// Multiplies every amplitude by `e^{iφ}`.
    pub fn apply_global_phase(&mut self, phase: f64) {
        let factor = Complex64::new(libm::cos(phase), libm::sin(phase));
        for a in &mut self.amplitudes {
            *a *= factor;
        }
    }

    fn mask(&self, qubit: usize) -> Result<usize> {
        if qubit >= self.n_qubits {
            return Err(Error::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            });
        }
        Ok(1 << (self.n_qubits - 1 - qubit))
    }

    pub fn apply_matrix(&mut self, matrix: &Matrix2, qubit: usize) -> Result<()> {
        let mask = self.mask(qubit)?;
        let [[m00, m01], [m10, m11]] = *matrix;
        for i in 0..self.amplitudes.len() {
            if i & mask != 0 {
                continue;
            }
            let j = i | mask;
            let a = self.amplitudes[i];
            let b = self.amplitudes[j];
            self.amplitudes[i] = m00 * a + m01 * b;
            self.amplitudes[j] = m10 * a + m11 * b;
        }
        Ok(())
    }

    pub fn apply_1q(&mut self, gate: &Gate1Q) -> Result<()> {
        self.apply_matrix(&gate.matrix, gate.qubit)
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) -> Result<()> {
        if control == target {
            return Err(Error::ControlIsTarget(control));
        }
        let cmask = self.mask(control)?;
        let tmask = self.mask(target)?;
        for i in 0..self.amplitudes.len() {
            if i & cmask != 0 && i & tmask == 0 {
                self.amplitudes.swap(i, i | tmask);
            }
        }
        Ok(())
    }

    /// Applies the unscaled Pauli `axis` to `qubit`.
    pub fn apply_pauli(&mut self, axis: Axis, qubit: usize) -> Result<()> {
        let mask = self.mask(qubit)?;
        match axis {
            Axis::Z => {
                for (i, a) in self.amplitudes.iter_mut().enumerate() {
                    if i & mask != 0 {
                        *a = -*a;
                    }
                }
            }
            Axis::X | Axis::Y => self.apply_matrix(&axis.pauli(), qubit)?,
        }
        Ok(())
    }

    /// `scale · ⟨ψ|P|ψ⟩`.
    pub fn expect_pauli(&self, obs: &PauliObservable) -> Result<f64> {
        let mask = self.mask(obs.qubit)?;
        let mut acc = 0.0;
        match obs.axis {
            Axis::Z => {
                for (i, a) in self.amplitudes.iter().enumerate() {
                    if i & mask == 0 {
                        acc += a.norm_sqr();
                    } else {
                        acc -= a.norm_sqr();
                    }
                }
            }
            Axis::X | Axis::Y => {
                for i in 0..self.amplitudes.len() {
                    if i & mask != 0 {
                        continue;
                    }
                    let cross = self.amplitudes[i].conj() * self.amplitudes[i | mask];
                    acc += 2.0 * if obs.axis == Axis::X { cross.re } else { cross.im };
                }
            }
        }
        Ok(obs.scale * acc)
    }

    /// `Re(scale_a · scale_b · ⟨ψ|P_a P_b|ψ⟩)`.
    pub fn expect_pauli_product(&self, a: &PauliObservable, b: &PauliObservable) -> Result<f64> {
        self.mask(a.qubit)?;
        let mut rotated = self.clone();
        rotated.apply_pauli(b.axis, b.qubit)?;
        rotated.apply_pauli(a.axis, a.qubit)?;
        Ok(a.scale * b.scale * self.inner(&rotated).re)
    }

    /// `⟨Z_q⟩` for every qubit in one sweep.
    pub fn z_expectations(&self) -> Vec<f64> {
        let n = self.n_qubits;
        let mut out = vec![0.0; n];
        for (i, a) in self.amplitudes.iter().enumerate() {
            let p = a.norm_sqr();
            for (q, slot) in out.iter_mut().enumerate() {
                if i & (1 << (n - 1 - q)) == 0 {
                    *slot += p;
                } else {
                    *slot -= p;
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, PI};

    fn close(a: Complex64, b: Complex64, tol: f64) -> bool {
        (a - b).norm() < tol
    }

    fn basis(n: usize, index: usize) -> StateVector {
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = ONE;
        StateVector::from_amplitudes(amps).unwrap()
    }

    #[test]
    fn init_zero() {
        assert_eq!(StateVector::zero(1).unwrap().amplitudes(), &[ONE, ZERO]);
        assert_eq!(StateVector::zero(2).unwrap().amplitudes(), &[ONE, ZERO, ZERO, ZERO]);
        assert!(matches!(
            StateVector::zero_capped(20, 12),
            Err(Error::QubitCount { n: 20, max: 12 })
        ));
        assert!(StateVector::zero(0).is_err());
        assert!(StateVector::zero(21).is_err());
    }

    #[test]
    fn rotation_examples() {
        let id = Gate1Q::rotation(Axis::Y, 0.0, 0).unwrap();
        assert_eq!(id.matrix, [[ONE, ZERO], [ZERO, ONE]]);

        let flip = Gate1Q::rotation(Axis::Y, PI, 0).unwrap();
        let expected = [[ZERO, -ONE], [ONE, ZERO]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(close(flip.matrix[i][j], expected[i][j], 1e-15));
            }
        }

        let theta = 0.731;
        let mut s = StateVector::zero(1).unwrap();
        s.apply_matrix(&rotation_matrix(Axis::X, 0.3), 0).unwrap();
        let before = s.clone();
        s.apply_1q(&Gate1Q::rotation(Axis::Z, theta, 0).unwrap()).unwrap();
        s.apply_1q(&Gate1Q::rotation(Axis::Z, -theta, 0).unwrap()).unwrap();
        for (a, b) in s.amplitudes().iter().zip(before.amplitudes()) {
            assert!(close(*a, *b, 1e-15));
        }
        assert_eq!(id.generator.unwrap().scale, 0.5);
    }

    #[test]
    fn rotation_rejects_non_finite_angle() {
        assert!(matches!(
            Gate1Q::rotation(Axis::X, f64::NAN, 0),
            Err(Error::NonFiniteAngle(_))
        ));
        assert!(Gate1Q::rotation(Axis::Z, f64::INFINITY, 0).is_err());
    }

    #[test]
    fn rotations_are_unitary() {
        for axis in [Axis::X, Axis::Y, Axis::Z] {
            for k in -20..=20 {
                let g = Gate1Q::rotation(axis, k as f64 * 0.37, 0).unwrap();
                assert!(g.unitarity_defect() < 1e-12);
            }
        }
    }

    #[test]
    fn apply_1q_examples() {
        let mut s = StateVector::zero(1).unwrap();
        s.apply_1q(&Gate1Q::pauli(Axis::X, 0)).unwrap();
        assert_eq!(s, basis(1, 1));

        let mut s = StateVector::zero(1).unwrap();
        s.apply_1q(&Gate1Q::rotation(Axis::Y, FRAC_PI_2, 0).unwrap()).unwrap();
        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        assert!(close(s.amplitudes()[0], h, 1e-15));
        assert!(close(s.amplitudes()[1], h, 1e-15));

        let err = s.apply_1q(&Gate1Q::pauli(Axis::X, 1)).unwrap_err();
        assert_eq!(err, Error::QubitOutOfRange { qubit: 1, n_qubits: 1 });
    }

    #[test]
    fn cnot_examples() {
        let mut s = basis(2, 0b10);
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s, basis(2, 0b11));

        let mut s = StateVector::zero(2).unwrap();
        s.apply_cnot(0, 1).unwrap();
        assert_eq!(s, StateVector::zero(2).unwrap());

        assert_eq!(s.apply_cnot(1, 1), Err(Error::ControlIsTarget(1)));
        assert!(s.apply_cnot(0, 2).is_err());
    }

    #[test]
    fn pauli_expectations() {
        let z = PauliObservable::z(0);
        assert_eq!(StateVector::zero(1).unwrap().expect_pauli(&z).unwrap(), 1.0);
        assert_eq!(basis(1, 1).expect_pauli(&z).unwrap(), -1.0);

        let mut plus = StateVector::zero(1).unwrap();
        plus.apply_1q(&Gate1Q::rotation(Axis::Y, FRAC_PI_2, 0).unwrap())
            .unwrap();
        assert!(plus.expect_pauli(&z).unwrap().abs() < 1e-10);
        let x = PauliObservable::new(Axis::X, 0, 0.5);
        assert!((plus.expect_pauli(&x).unwrap() - 0.5).abs() < 1e-12);

        // R_X(π/2)|0⟩ = (|0⟩ − i|1⟩)/√2 has ⟨Y⟩ = −1.
        let mut s = StateVector::zero(1).unwrap();
        s.apply_1q(&Gate1Q::rotation(Axis::X, FRAC_PI_2, 0).unwrap()).unwrap();
        let y = PauliObservable::new(Axis::Y, 0, 1.0);
        assert!((s.expect_pauli(&y).unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn pauli_product_expectations() {
        let a = PauliObservable::new(Axis::Z, 0, 0.5);
        let s = StateVector::zero(1).unwrap();
        assert_eq!(s.expect_pauli_product(&a, &a).unwrap(), 0.25);

        let za = PauliObservable::new(Axis::Z, 0, 0.5);
        let zb = PauliObservable::new(Axis::Z, 1, 3.0);
        let s = StateVector::zero(2).unwrap();
        assert_eq!(s.expect_pauli_product(&za, &zb).unwrap(), 1.5);

        let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
        let bell = StateVector::from_amplitudes(vec![h, ZERO, ZERO, h]).unwrap();
        assert!((bell.expect_pauli_product(&za, &zb).unwrap() - 1.5).abs() < 1e-12);
        assert!(bell.expect_pauli(&za).unwrap().abs() < 1e-12);
    }

    #[test]
    fn z_expectations_match_single_queries() {
        let mut s = StateVector::zero(3).unwrap();
        for (q, angle) in [(0, 0.4), (1, 1.3), (2, 2.9)] {
            s.apply_1q(&Gate1Q::rotation(Axis::Y, angle, q).unwrap()).unwrap();
        }
        s.apply_cnot(0, 2).unwrap();
        let all = s.z_expectations();
        for q in 0..3 {
            let single = s.expect_pauli(&PauliObservable::z(q)).unwrap();
            assert!((all[q] - single).abs() < 1e-14);
        }
    }

    #[test]
    fn from_amplitudes_validates() {
        assert!(StateVector::from_amplitudes(vec![ONE, ZERO, ZERO]).is_err());
        assert!(StateVector::from_amplitudes(vec![ONE, ONE]).is_err());
        assert!(StateVector::from_amplitudes(vec![ONE]).is_err());
    }
}
