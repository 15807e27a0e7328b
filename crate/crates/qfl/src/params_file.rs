//! `params.bin`: `"QFLP"`, a little-endian `u32` format version, a `u64`
//! count, then that many little-endian `f64` angles.

use qfl_core::ParamVector;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"QFLP";
pub const VERSION: u32 = 1;

pub fn encode(params: &[f64]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * params.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<ParamVector> {
    let bad = |m: &str| CliError::Data(format!("params file: {m}"));
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("missing QFLP header"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(&format!("unsupported version {version}")));
    }
    let count = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = &bytes[16..];
    if body.len() != count.saturating_mul(8) {
        return Err(bad(&format!("{count} values declared, {} bytes present", body.len())));
    }
    Ok(ParamVector(
        body.chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    ))
}
