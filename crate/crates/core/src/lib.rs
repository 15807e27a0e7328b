//! Dense statevector simulation of variational quantum circuits, block-diagonal
//! quantum natural gradient, and federated aggregation of metric-preconditioned
//! gradients across simulated participants.
//!
//! The crate is `no_std` (with `alloc`) so that the numerical kernels carry no
//! IO. File formats, MNIST loading, threading and the experiment runner live in
//! the companion `qfl` crate.
//!
//! Basis convention: qubit 0 is the most significant bit of a basis index, so
//! for two qubits the amplitudes are ordered `|00⟩, |01⟩, |10⟩, |11⟩` with the
//! left label belonging to qubit 0.
#![allow(clippy::needless_range_loop)]
#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod circuit;
pub mod dataset;
pub mod error;
pub mod federated;
pub mod gradient;
mod linalg;
pub mod metric;
pub mod optimizer;
pub mod state;

pub use circuit::{class_scores, tpe_encode, CircuitLayout, Layer, ParamGate, ParamVector, Readout, Task};
pub use dataset::FeatureSample;
pub use error::{Error, ErrorKind, Result};
pub use gradient::{GradientMethod, GradientVector, LossKind, LossSpec};
pub use metric::{MetricBlock, MetricBlocks, PseudoInverseConfig};
pub use optimizer::{OptimizerKind, OptimizerState};
pub use state::{Axis, Gate1Q, GateKind, PauliObservable, StateVector};
