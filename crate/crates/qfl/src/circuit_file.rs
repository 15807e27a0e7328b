//! `circuit.txt`: a TOML description of the layout, readable by people and
//! by [`parse`].

use qfl_core::{Axis, CircuitLayout, Layer, ParamGate};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Serialize, Deserialize)]
struct CircuitFile {
    encoding: String,
    rotation: String,
    basis: String,
    qubits: usize,
    depth: usize,
    param_count: usize,
    layers: Vec<LayerEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerEntry {
    first_slot: usize,
    cnot: Vec<[usize; 2]>,
    /// `"RX 3"` rotates qubit 3 about X.
    gates: Vec<String>,
}

pub fn render(layout: &CircuitLayout) -> String {
    let layers = layout
        .layers()
        .iter()
        .enumerate()
        .map(|(i, layer)| LayerEntry {
            first_slot: layout.layer_slots(i).start,
            cnot: layer.entangler.iter().map(|&(c, t)| [c, t]).collect(),
            gates: layer
                .gates
                .iter()
                .map(|g| format!("R{} {}", g.axis.symbol(), g.qubit))
                .collect(),
        })
        .collect();
    let file = CircuitFile {
        encoding: "RY(pi * x_u) on qubit u, features in [0, 1]".into(),
        rotation: "R_P(theta) = exp(-i theta P / 2)".into(),
        basis: "qubit 0 is the most significant bit".into(),
        qubits: layout.n_qubits(),
        depth: layout.depth(),
        param_count: layout.param_count(),
        layers,
    };
    toml::to_string(&file).expect("circuit description is TOML-representable")
}

fn parse_gate(text: &str) -> Result<ParamGate> {
    let bad = || CliError::Config(format!("gate {text:?} is not of the form \"RX 0\""));
    let (name, qubit) = text.split_once(' ').ok_or_else(bad)?;
    let axis = match name {
        "RX" => Axis::X,
        "RY" => Axis::Y,
        "RZ" => Axis::Z,
        _ => return Err(bad()),
    };
    Ok(ParamGate::new(axis, qubit.trim().parse().map_err(|_| bad())?))
}

pub fn parse(text: &str) -> Result<CircuitLayout> {
    let file: CircuitFile = toml::from_str(text).map_err(|e| CliError::Config(format!("circuit file: {e}")))?;
    let layers = file
        .layers
        .iter()
        .map(|entry| {
            Ok(Layer {
                entangler: entry.cnot.iter().map(|&[c, t]| (c, t)).collect(),
                gates: entry.gates.iter().map(|g| parse_gate(g)).collect::<Result<_>>()?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let layout = CircuitLayout::new(file.qubits, file.depth, layers)?;
    if layout.param_count() != file.param_count {
        return Err(CliError::Config(format!(
            "circuit file declares {} parameters but its layers hold {}",
            file.param_count,
            layout.param_count()
        )));
    }
    Ok(layout)
}
