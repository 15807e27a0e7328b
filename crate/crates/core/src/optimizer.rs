//! Parameter update rules and a centralized (single-VQC) training loop.

use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{CircuitLayout, ParamVector};
use crate::dataset::FeatureSample;
use crate::error::{Error, Result};
use crate::gradient::{batch_loss_grad, GradientMethod, LossSpec};
use crate::metric::{apply_pseudo_inverse, metric_for_batch, MetricBlocks, PseudoInverseConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum OptimizerKind {
    Sgd,
    Adagrad,
    Adam,
    Qngd,
}

impl OptimizerKind {
    pub const ALL: [OptimizerKind; 4] = [
        OptimizerKind::Sgd,
        OptimizerKind::Adagrad,
        OptimizerKind::Adam,
        OptimizerKind::Qngd,
    ];

    /// Learning rate used when none is configured: the best value on the
    /// 8-qubit binary task among those that still descend monotonically on
    /// small toy problems.
    pub fn default_eta(self) -> f64 {
        match self {
            OptimizerKind::Sgd => 1.0,
            OptimizerKind::Adagrad => 0.3,
            OptimizerKind::Adam => 0.03,
            OptimizerKind::Qngd => 0.2,
        }
    }

    pub fn default_eps(self) -> f64 {
        match self {
            OptimizerKind::Adagrad => 1e-10,
            _ => 1e-8,
        }
    }
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub eta: f64,
    pub adagrad_accum: Vec<f64>,
    pub adam_m: Vec<f64>,
    pub adam_v: Vec<f64>,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub eps_stability: f64,
    pub step_count: u64,
}

impl OptimizerState {
    pub fn new(kind: OptimizerKind, eta: f64, param_count: usize) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::Config(alloc::format!(
                "learning rate {eta} must be finite and ≥ 0"
            )));
        }
        Ok(Self {
            kind,
            eta,
            adagrad_accum: vec![0.0; param_count],
            adam_m: vec![0.0; param_count],
            adam_v: vec![0.0; param_count],
            adam_beta1: ADAM_BETA1,
            adam_beta2: ADAM_BETA2,
            eps_stability: kind.default_eps(),
            step_count: 0,
        })
    }

    fn check(&self, params: &[f64], grad: &[f64]) -> Result<()> {
        if params.len() != grad.len() {
            return Err(Error::DimensionMismatch {
                what: "gradient",
                expected: params.len(),
                found: grad.len(),
            });
        }
        if self.kind != OptimizerKind::Sgd && self.kind != OptimizerKind::Qngd && self.adam_m.len() != params.len() {
            return Err(Error::DimensionMismatch {
                what: "optimizer state",
                expected: params.len(),
                found: self.adam_m.len(),
            });
        }
        Ok(())
    }

    /// `θ ← θ − η·g`.
    pub fn sgd_step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        self.check(params, grad)?;
        for (p, g) in params.iter_mut().zip(grad) {
            *p -= self.eta * g;
        }
        self.step_count += 1;
        Ok(())
    }

    /// `a ← a + g²`, `θ ← θ − η·g/√(a + ε)`.
    pub fn adagrad_step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        self.check(params, grad)?;
        for ((p, g), a) in params.iter_mut().zip(grad).zip(&mut self.adagrad_accum) {
            *a += g * g;
            *p -= self.eta * g / libm::sqrt(*a + self.eps_stability);
        }
        self.step_count += 1;
        Ok(())
    }

    /// Bias-corrected Adam.
    pub fn adam_step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        self.check(params, grad)?;
        self.step_count += 1;
        let t = self.step_count as f64;
        let (b1, b2) = (self.adam_beta1, self.adam_beta2);
        let c1 = 1.0 - libm::pow(b1, t);
        let c2 = 1.0 - libm::pow(b2, t);
        for (((p, g), m), v) in params.iter_mut().zip(grad).zip(&mut self.adam_m).zip(&mut self.adam_v) {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= self.eta * m_hat / (libm::sqrt(v_hat) + self.eps_stability);
        }
        Ok(())
    }

    /// `θ ← θ − η·g⁺∇L`.
    pub fn qngd_step(
        &mut self,
        params: &mut [f64],
        grad: &[f64],
        blocks: &MetricBlocks,
        pinv: &PseudoInverseConfig,
    ) -> Result<()> {
        let natural = apply_pseudo_inverse(blocks, grad, pinv)?;
        self.sgd_step(params, &natural)
    }

    /// Dispatches on `kind` for updates that need only the gradient. For
    /// [`OptimizerKind::Qngd`] the gradient is taken to be preconditioned
    /// already, so the step is `θ − η·grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) -> Result<()> {
        match self.kind {
            OptimizerKind::Sgd | OptimizerKind::Qngd => self.sgd_step(params, grad),
            OptimizerKind::Adagrad => self.adagrad_step(params, grad),
            OptimizerKind::Adam => self.adam_step(params, grad),
        }
    }
}

/// Settings for [`train_single`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingleConfig {
    pub kind: OptimizerKind,
    pub eta: f64,
    pub pinv: PseudoInverseConfig,
    pub loss: LossSpec,
    pub method: GradientMethod,
    pub epochs: usize,
}

/// Full-batch training of one circuit on `data`. Returns the parameters
/// after every epoch (excluding the initial point) and the mean loss that
/// each update was computed from.
pub fn train_single(
    layout: &CircuitLayout,
    init: &ParamVector,
    data: &[FeatureSample],
    cfg: &SingleConfig,
) -> Result<(Vec<ParamVector>, Vec<f64>)> {
    let mut params = init.clone();
    let mut state = OptimizerState::new(cfg.kind, cfg.eta, layout.param_count())?;
    let mut trajectory = Vec::with_capacity(cfg.epochs);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let (loss, grad) = batch_loss_grad(layout, &params, data, &cfg.loss, cfg.method)?;
        match cfg.kind {
            OptimizerKind::Qngd => {
                let blocks = metric_for_batch(layout, &params, data)?;
                state.qngd_step(&mut params, &grad, &blocks, &cfg.pinv)?;
            }
            _ => state.step(&mut params, &grad)?,
        }
        if !params.is_finite() {
            return Err(Error::NonFinite("parameters"));
        }
        losses.push(loss);
        trajectory.push(params.clone());
    }
    Ok((trajectory, losses))
}
