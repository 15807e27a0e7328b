//! Block-diagonal Fubini–Study metric and its regularized inverse.
//!
//! For parametric layer `l` with generators `G_i = P_i/2` acting on distinct
//! qubits, the block entry is the generator covariance in the state that
//! enters the layer:
//!
//! ```text
//! g_l[i][j] = Re⟨ψ_l|G_i G_j|ψ_l⟩ − ⟨ψ_l|G_i|ψ_l⟩⟨ψ_l|G_j|ψ_l⟩
//! ```
//!
//! Diagonal entries therefore lie in `[0, 1/4]`. Cross-layer entries are
//! dropped.

use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::CircuitLayout;
use crate::dataset::FeatureSample;
use crate::error::{Error, Result};
use crate::gradient::GradientVector;
use crate::linalg;
use crate::state::{PauliObservable, StateVector};

/// Square symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlock {
    dim: usize,
    entries: Vec<f64>,
}

impl MetricBlock {
    pub fn new(dim: usize, entries: Vec<f64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                what: "metric block entries",
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Ok(Self { dim, entries })
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![0.0; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i + 1..self.dim {
                worst = worst.max((self.get(i, j) - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        linalg::symmetric_eigen(&self.entries, self.dim).0
    }

    /// `(self + λI)·v`.
    pub fn mul_vec_shifted(&self, v: &[f64], lambda: f64) -> Vec<f64> {
        (0..self.dim)
            .map(|i| {
                let row: f64 = (0..self.dim).map(|j| self.get(i, j) * v[j]).sum();
                row + lambda * v[i]
            })
            .collect()
    }
}

/// One block per layer of the layout, in layer order.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricBlocks {
    blocks: Vec<MetricBlock>,
}

impl MetricBlocks {
    pub fn new(blocks: Vec<MetricBlock>) -> Self {
        Self { blocks }
    }

    /// Identity blocks shaped like `layout`'s layers.
    pub fn identity(layout: &CircuitLayout) -> Self {
        Self::new(
            layout
                .layers()
                .iter()
                .map(|layer| MetricBlock::identity(layer.gates.len()))
                .collect(),
        )
    }

    pub fn blocks(&self) -> &[MetricBlock] {
        &self.blocks
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.iter().map(MetricBlock::dim).sum()
    }

    /// Dense block-diagonal assembly; zero outside the blocks.
    pub fn to_dense(&self) -> Vec<f64> {
        let n = self.total_dim();
        let mut out = vec![0.0; n * n];
        let mut offset = 0;
        for block in &self.blocks {
            for i in 0..block.dim {
                for j in 0..block.dim {
                    out[(offset + i) * n + offset + j] = block.get(i, j);
                }
            }
            offset += block.dim;
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PseudoInverseConfig {
    /// Tikhonov shift `λ` added to every block before inversion.
    pub reg_lambda: f64,
    /// With `λ = 0`, eigenvalues at or below `svd_cutoff · max eigenvalue`
    /// are treated as zero.
    pub svd_cutoff: f64,
}

impl Default for PseudoInverseConfig {
    fn default() -> Self {
        Self {
            reg_lambda: 1e-6,
            svd_cutoff: 1e-10,
        }
    }
}

impl PseudoInverseConfig {
    pub fn new(reg_lambda: f64, svd_cutoff: f64) -> Result<Self> {
        let cfg = Self { reg_lambda, svd_cutoff };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.reg_lambda.is_finite()
            && self.svd_cutoff.is_finite()
            && self.reg_lambda >= 0.0
            && self.svd_cutoff >= 0.0
            && (self.reg_lambda > 0.0 || self.svd_cutoff > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::Config(alloc::format!(
                "pseudo-inverse needs λ ≥ 0 and cutoff ≥ 0, not both zero (got λ = {}, cutoff = {})",
                self.reg_lambda,
                self.svd_cutoff
            )))
        }
    }
}

/// Covariance matrix of `generators` in `state`.
pub fn metric_block(state: &StateVector, generators: &[PauliObservable]) -> Result<MetricBlock> {
    let mut seen = vec![false; state.n_qubits()];
    for g in generators {
        let slot = seen.get_mut(g.qubit).ok_or(Error::QubitOutOfRange {
            qubit: g.qubit,
            n_qubits: state.n_qubits(),
        })?;
        if core::mem::replace(slot, true) {
            return Err(Error::SharedQubit(g.qubit));
        }
    }
    let n = generators.len();
    let means = generators
        .iter()
        .map(|g| state.expect_pauli(g))
        .collect::<Result<Vec<_>>>()?;
    let mut entries = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let second = state.expect_pauli_product(&generators[i], &generators[j])?;
            let value = second - means[i] * means[j];
            entries[i * n + j] = value;
            entries[j * n + i] = value;
        }
    }
    MetricBlock::new(n, entries)
}

pub fn metric_for_sample(layout: &CircuitLayout, params: &[f64], x: &[f64]) -> Result<MetricBlocks> {
    let states = layout.layer_states(params, x)?;
    let blocks = layout
        .layers()
        .iter()
        .zip(&states)
        .map(|(layer, state)| {
            let generators: Vec<_> = layer.gates.iter().map(|g| g.generator()).collect();
            metric_block(state, &generators)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MetricBlocks::new(blocks))
}

/// Entrywise mean of the per-sample metrics, accumulated in sample order.
pub fn metric_for_batch(layout: &CircuitLayout, params: &[f64], batch: &[FeatureSample]) -> Result<MetricBlocks> {
    let (first, rest) = batch.split_first().ok_or(Error::EmptyBatch)?;
    let mut acc = metric_for_sample(layout, params, &first.features)?;
    for sample in rest {
        let next = metric_for_sample(layout, params, &sample.features)?;
        for (a, b) in acc.blocks.iter_mut().zip(&next.blocks) {
            for (x, y) in a.entries.iter_mut().zip(&b.entries) {
                *x += y;
            }
        }
    }
    let n = batch.len() as f64;
    for block in &mut acc.blocks {
        for x in &mut block.entries {
            *x /= n;
        }
    }
    Ok(acc)
}

/// Applies `g⁺` block by block to `grad`.
///
/// With `λ > 0` each block solves `(g_l + λI)·y = grad_l`. With `λ = 0` the
/// spectral pseudo-inverse is used; eigenvalues at or below the relative
/// cutoff (including any tiny negative ones) are dropped, so a block whose
/// spectrum is entirely below the cutoff maps its segment to zero.
pub fn apply_pseudo_inverse(blocks: &MetricBlocks, grad: &[f64], cfg: &PseudoInverseConfig) -> Result<GradientVector> {
    cfg.validate()?;
    if grad.len() != blocks.total_dim() {
        return Err(Error::DimensionMismatch {
            what: "gradient for metric blocks",
            expected: blocks.total_dim(),
            found: grad.len(),
        });
    }
    let mut out = Vec::with_capacity(grad.len());
    let mut offset = 0;
    for block in &blocks.blocks {
        let segment = &grad[offset..offset + block.dim];
        offset += block.dim;
        if block.dim == 0 {
            continue;
        }
        let (values, vectors) = linalg::symmetric_eigen(&block.entries, block.dim);
        let solved = if cfg.reg_lambda > 0.0 {
            let lambda = cfg.reg_lambda;
            linalg::spectral_apply(&values, &vectors, segment, |v| {
                let shifted = v + lambda;
                if shifted > 0.0 {
                    1.0 / shifted
                } else {
                    0.0
                }
            })
        } else {
            let largest = values.iter().copied().fold(0.0, f64::max);
            let floor = cfg.svd_cutoff * largest;
            linalg::spectral_apply(&values, &vectors, segment, |v| {
                if v > floor && v > 0.0 {
                    1.0 / v
                } else {
                    0.0
                }
            })
        };
        out.extend(solved);
    }
    let out = GradientVector(out);
    if !out.is_finite() {
        return Err(Error::NonFinite("preconditioned gradient"));
    }
    Ok(out)
}
