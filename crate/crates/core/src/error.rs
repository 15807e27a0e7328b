use alloc::boxed::Box;
use alloc::string::String;

use thiserror::Error;

pub type Result<T, E = Error> = core::result::Result<T, E>;

/// Coarse classification used by front-ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Config,
    Data,
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("qubit count {n} outside the supported range 1..={max}")]
    QubitCount { n: usize, max: usize },

    #[error("non-finite rotation angle {0}")]
    NonFiniteAngle(f64),

    #[error("qubit {qubit} out of range for a {n_qubits}-qubit register")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("CNOT control and target are both qubit {0}")]
    ControlIsTarget(usize),

    #[error("feature {index} = {value} lies outside [0, 1]")]
    FeatureOutOfDomain { index: usize, value: f64 },

    #[error("{what}: expected length {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("layer {layer} out of range 1..={layers}")]
    LayerOutOfRange { layer: usize, layers: usize },

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("two generators of one parametric layer act on qubit {0}")]
    SharedQubit(usize),

    #[error("empty batch")]
    EmptyBatch,

    #[error("participant {0} has an empty shard")]
    EmptyShard(usize),

    #[error("{payloads} payloads for {weights} aggregation weights")]
    WeightCountMismatch { payloads: usize, weights: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("participant {id} failed: {source}")]
    ParticipantFailed {
        id: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::NonFiniteAngle(_) | Error::NonFinite(_) => ErrorKind::Numeric,
            Error::FeatureOutOfDomain { .. } => ErrorKind::Data,
            Error::ParticipantFailed { source, .. } => source.kind(),
            _ => ErrorKind::Config,
        }
    }
}
