//! Dense-matrix reference simulator. Every operator is materialised as a
//! full `2^n × 2^n` matrix built from Kronecker products.
#![allow(dead_code)]

use num_complex::Complex64;
use qfl_core::{Axis, CircuitLayout};

pub type Dense = Vec<Vec<Complex64>>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn pauli(axis: Axis) -> [[Complex64; 2]; 2] {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    match axis {
        Axis::X => [[z, o], [o, z]],
        Axis::Y => [[z, -i], [i, z]],
        Axis::Z => [[o, z], [z, -o]],
    }
}

/// `cos(θ/2)·I − i·sin(θ/2)·P`.
pub fn rotation(axis: Axis, theta: f64) -> [[Complex64; 2]; 2] {
    let p = pauli(axis);
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut m = [[c(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            let id = if r == k { co } else { 0.0 };
            m[r][k] = c(id, 0.0) - c(0.0, si) * p[r][k];
        }
    }
    m
}

/// `d/dθ` of [`rotation`].
pub fn rotation_derivative(axis: Axis, theta: f64) -> [[Complex64; 2]; 2] {
    let p = pauli(axis);
    let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
    let mut m = [[c(0.0, 0.0); 2]; 2];
    for r in 0..2 {
        for k in 0..2 {
            let id = if r == k { -si / 2.0 } else { 0.0 };
            m[r][k] = c(id, 0.0) - c(0.0, co / 2.0) * p[r][k];
        }
    }
    m
}

pub fn kron(a: &Dense, b: &Dense) -> Dense {
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

fn small(m: &[[Complex64; 2]; 2]) -> Dense {
    vec![m[0].to_vec(), m[1].to_vec()]
}

/// `I ⊗ … ⊗ m ⊗ … ⊗ I` with qubit 0 as the leftmost factor.
pub fn embed(m: &[[Complex64; 2]; 2], qubit: usize, n: usize) -> Dense {
    let id = small(&[[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]);
    let mut out = vec![vec![c(1.0, 0.0)]];
    for q in 0..n {
        out = kron(&out, &if q == qubit { small(m) } else { id.clone() });
    }
    out
}

/// `|0⟩⟨0| ⊗ I + |1⟩⟨1| ⊗ X`, expanded over the register.
pub fn cnot(control: usize, target: usize, n: usize) -> Dense {
    let p0 = [[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = [[c(0.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]];
    let a = embed(&p0, control, n);
    let b = matmul(&embed(&p1, control, n), &embed(&pauli(Axis::X), target, n));
    a.iter()
        .zip(&b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn matmul(a: &Dense, b: &Dense) -> Dense {
    let n = a.len();
    let mut out = vec![vec![c(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn apply(m: &Dense, v: &[Complex64]) -> Vec<Complex64> {
    m.iter()
        .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `⊗_i [cos(πx_i/2), sin(πx_i/2)]`.
pub fn product_encoding(x: &[f64]) -> Vec<Complex64> {
    let mut out = vec![c(1.0, 0.0)];
    for &xi in x {
        let (co, si) = (
            (std::f64::consts::PI * xi / 2.0).cos(),
            (std::f64::consts::PI * xi / 2.0).sin(),
        );
        out = out.iter().flat_map(|a| [a * co, a * si]).collect();
    }
    out
}

/// Runs `layout` up to and including the rotations of 0-based layer
/// `through`. If `derivative` names a slot, that gate is replaced by its
/// angle derivative.
pub fn simulate(
    layout: &CircuitLayout,
    params: &[f64],
    x: &[f64],
    through: usize,
    derivative: Option<usize>,
) -> Vec<Complex64> {
    let n = layout.n_qubits();
    let mut psi = product_encoding(x);
    let mut slot = 0;
    for layer in &layout.layers()[..=through] {
        for &(ctl, tgt) in &layer.entangler {
            psi = apply(&cnot(ctl, tgt, n), &psi);
        }
        for g in &layer.gates {
            let m = if derivative == Some(slot) {
                rotation_derivative(g.axis, params[slot])
            } else {
                rotation(g.axis, params[slot])
            };
            psi = apply(&embed(&m, g.qubit, n), &psi);
            slot += 1;
        }
    }
    psi
}
