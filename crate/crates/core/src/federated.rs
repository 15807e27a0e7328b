//! Synchronous federated training over simulated participants.
//!
//! Each epoch the coordinator broadcasts the global parameters, every
//! participant computes a gradient on its own shard and uploads it (for
//! FQNGD, preconditioned by the inverse of its local block-diagonal metric),
//! and the coordinator applies
//!
//! ```text
//! θ̄ ← θ̄ − η · Σ_k (|S_k| / |S|) · g_k⁺ ∇L(θ̄; S_k)
//! ```
//!
//! Baseline optimizers upload the raw gradient instead and keep their
//! adaptive state at the coordinator. Payloads never carry parameters.

use alloc::boxed::Box;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{CircuitLayout, ParamVector, Task};
use crate::dataset::FeatureSample;
use crate::error::{Error, Result};
use crate::gradient::{batch_loss, batch_loss_grad, GradientMethod, GradientVector, LossSpec};
use crate::metric::{apply_pseudo_inverse, metric_for_batch, PseudoInverseConfig};
use crate::optimizer::{OptimizerKind, OptimizerState};

/// A simulated device holding a data shard and a copy of the circuit.
#[derive(Debug, Clone)]
pub struct Participant {
    id: usize,
    shard: Vec<FeatureSample>,
    layout: CircuitLayout,
    local_params: ParamVector,
}

impl Participant {
    pub fn new(id: usize, shard: Vec<FeatureSample>, layout: CircuitLayout) -> Result<Self> {
        if shard.is_empty() {
            return Err(Error::EmptyShard(id));
        }
        let local_params = ParamVector::zeros(layout.param_count());
        Ok(Self {
            id,
            shard,
            layout,
            local_params,
        })
    }

    pub fn id(&self) -> usize {
        self.id
    }

    pub fn shard(&self) -> &[FeatureSample] {
        &self.shard
    }

    pub fn layout(&self) -> &CircuitLayout {
        &self.layout
    }

    pub fn local_params(&self) -> &ParamVector {
        &self.local_params
    }
}

/// Overwrites every participant's local parameters with `global`.
pub fn broadcast(global: &ParamVector, participants: &mut [Participant]) -> Result<()> {
    if participants.is_empty() {
        log::warn!("broadcast to an empty participant set");
        return Ok(());
    }
    for p in participants.iter_mut() {
        if p.local_params.len() != global.len() {
            return Err(Error::DimensionMismatch {
                what: "broadcast parameters",
                expected: p.local_params.len(),
                found: global.len(),
            });
        }
        p.local_params.copy_from_slice(global);
    }
    Ok(())
}

/// What a participant uploads.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Upload {
    /// `g_k⁺ ∇L_k` with the participant's batch-mean metric.
    Natural(PseudoInverseConfig),
    /// The plain batch gradient.
    Raw,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalSettings {
    pub upload: Upload,
    pub loss: LossSpec,
    pub method: GradientMethod,
}

/// Message from a participant to the coordinator.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundPayload {
    pub participant_id: usize,
    pub preconditioned_grad: GradientVector,
    pub local_loss: f64,
    /// `|S_k|`, the full shard size.
    pub sample_count: usize,
}

/// Computes the upload at the participant's current local parameters. When
/// `selection` is given only those shard positions form the batch.
pub fn local_round(
    participant: &Participant,
    settings: &LocalSettings,
    selection: Option<&[usize]>,
) -> Result<RoundPayload> {
    if participant.shard.is_empty() {
        return Err(Error::EmptyShard(participant.id));
    }
    let picked: Vec<FeatureSample>;
    let batch: &[FeatureSample] = match selection {
        Some(positions) => {
            picked = positions
                .iter()
                .map(|&i| {
                    participant.shard.get(i).cloned().ok_or(Error::DimensionMismatch {
                        what: "minibatch position",
                        expected: participant.shard.len(),
                        found: i,
                    })
                })
                .collect::<Result<_>>()?;
            &picked
        }
        None => &participant.shard,
    };
    let layout = &participant.layout;
    let params = &participant.local_params;
    let (local_loss, grad) = batch_loss_grad(layout, params, batch, &settings.loss, settings.method)?;
    let preconditioned_grad = match settings.upload {
        Upload::Raw => grad,
        Upload::Natural(pinv) => {
            let blocks = metric_for_batch(layout, params, batch)?;
            apply_pseudo_inverse(&blocks, &grad, &pinv)?
        }
    };
    Ok(RoundPayload {
        participant_id: participant.id,
        preconditioned_grad,
        local_loss,
        sample_count: participant.shard.len(),
    })
}

/// `w_k = |S_k| / Σ_j |S_j|`.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregationWeights {
    sizes: Vec<usize>,
    w: Vec<f64>,
}

impl AggregationWeights {
    pub fn from_shard_sizes(sizes: &[usize]) -> Result<Self> {
        let total: usize = sizes.iter().sum();
        if sizes.is_empty() || sizes.contains(&0) {
            return Err(Error::Config("aggregation weights need non-empty shards".into()));
        }
        let w = sizes.iter().map(|&s| s as f64 / total as f64).collect();
        Ok(Self {
            sizes: sizes.to_vec(),
            w,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    pub fn shard_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// `Σ_k w_k · payload_k`, with `weights` aligned to `payloads` by position.
/// Terms are summed in ascending participant id.
pub fn aggregate(payloads: &[RoundPayload], weights: &AggregationWeights) -> Result<GradientVector> {
    if payloads.len() != weights.len() {
        return Err(Error::WeightCountMismatch {
            payloads: payloads.len(),
            weights: weights.len(),
        });
    }
    let dim = payloads.first().map_or(0, |p| p.preconditioned_grad.len());
    let mut order: Vec<usize> = (0..payloads.len()).collect();
    order.sort_by_key(|&i| payloads[i].participant_id);
    let mut acc = GradientVector::zeros(dim);
    for i in order {
        let g = &payloads[i].preconditioned_grad;
        if g.len() != dim {
            return Err(Error::DimensionMismatch {
                what: "uploaded gradient",
                expected: dim,
                found: g.len(),
            });
        }
        let w = weights.w[i];
        for (a, v) in acc.iter_mut().zip(g.iter()) {
            *a += w * v;
        }
    }
    Ok(acc)
}

/// `θ̄ ← θ̄ − η · aggregated`.
pub fn global_update(params: &mut ParamVector, aggregated: &[f64], eta: f64) -> Result<()> {
    if params.len() != aggregated.len() {
        return Err(Error::DimensionMismatch {
            what: "aggregated gradient",
            expected: params.len(),
            found: aggregated.len(),
        });
    }
    for (p, g) in params.iter_mut().zip(aggregated) {
        *p -= eta * g;
    }
    Ok(())
}

/// Runs one job per participant. Implementations may run them
/// concurrently but must return results in the order of `participants`.
pub trait Executor {
    fn map<T: Send>(
        &self,
        participants: &[Participant],
        job: &(dyn Fn(&Participant) -> Result<T> + Sync),
    ) -> Vec<Result<T>>;
}

/// One participant after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T: Send>(
        &self,
        participants: &[Participant],
        job: &(dyn Fn(&Participant) -> Result<T> + Sync),
    ) -> Vec<Result<T>> {
        participants.iter().map(job).collect()
    }
}

/// Monotonic seconds, for epoch timing.
pub trait Clock {
    fn seconds(&self) -> f64;
}

/// Always zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoClock;

impl Clock for NoClock {
    fn seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// `Qngd` selects FQNGD; the others are the federated baselines.
    pub optimizer: OptimizerKind,
    pub eta: f64,
    pub pinv: PseudoInverseConfig,
    pub loss: LossSpec,
    pub method: GradientMethod,
    pub epochs: usize,
    /// Per-participant minibatch size; `None` uses the whole shard.
    pub batch_size: Option<usize>,
    /// Seeds minibatch selection.
    pub seed: u64,
    /// Evaluate test accuracy every this many epochs; 0 disables.
    pub evaluate_every: usize,
}

impl TrainConfig {
    pub fn new(optimizer: OptimizerKind, task: Task) -> Self {
        Self {
            optimizer,
            eta: optimizer.default_eta(),
            pinv: PseudoInverseConfig::default(),
            loss: LossSpec::for_task(task),
            method: GradientMethod::ParameterShift,
            epochs: 30,
            batch_size: None,
            seed: 0,
            evaluate_every: 1,
        }
    }

    fn local_settings(&self) -> LocalSettings {
        let upload = match self.optimizer {
            OptimizerKind::Qngd => Upload::Natural(self.pinv),
            _ => Upload::Raw,
        };
        LocalSettings {
            upload,
            loss: self.loss,
            method: self.method,
        }
    }
}

/// Telemetry for one epoch.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    /// 1-based.
    pub epoch: usize,
    /// Global parameters after this epoch's update.
    pub global_params: ParamVector,
    /// `Σ_k w_k · loss_k` of the updated global parameters.
    pub train_loss: f64,
    pub participant_losses: Vec<f64>,
    /// Accuracy of the updated parameters on the held-out set.
    pub test_accuracy: Option<f64>,
    pub duration_secs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochOutcome {
    pub train_loss: f64,
    pub participant_losses: Vec<f64>,
}

/// Holds the global model, the participants and the optimizer state.
#[derive(Debug, Clone)]
pub struct Coordinator {
    layout: CircuitLayout,
    global: ParamVector,
    participants: Vec<Participant>,
    weights: AggregationWeights,
    state: OptimizerState,
    cfg: TrainConfig,
    epoch: usize,
}

impl Coordinator {
    /// Participant `k` receives `shards[k]`.
    pub fn new(
        layout: CircuitLayout,
        init: ParamVector,
        shards: Vec<Vec<FeatureSample>>,
        cfg: TrainConfig,
    ) -> Result<Self> {
        let participants = shards
            .into_iter()
            .enumerate()
            .map(|(id, shard)| Participant::new(id, shard, layout.clone()))
            .collect::<Result<Vec<_>>>()?;
        Self::from_participants(layout, init, participants, cfg)
    }

    /// Participants are ordered by id; ids must be unique and every layout
    /// must equal `layout`.
    pub fn from_participants(
        layout: CircuitLayout,
        init: ParamVector,
        mut participants: Vec<Participant>,
        cfg: TrainConfig,
    ) -> Result<Self> {
        if participants.is_empty() {
            return Err(Error::Config("federation needs at least one participant".into()));
        }
        if init.len() != layout.param_count() {
            return Err(Error::DimensionMismatch {
                what: "initial parameters",
                expected: layout.param_count(),
                found: init.len(),
            });
        }
        cfg.pinv.validate()?;
        if cfg.batch_size == Some(0) {
            return Err(Error::Config("minibatch size must be positive".into()));
        }
        participants.sort_by_key(Participant::id);
        for pair in participants.windows(2) {
            if pair[0].id == pair[1].id {
                return Err(Error::Config(alloc::format!("duplicate participant id {}", pair[0].id)));
            }
        }
        if let Some(p) = participants.iter().find(|p| p.layout != layout) {
            return Err(Error::Config(alloc::format!(
                "participant {} holds a different circuit layout",
                p.id
            )));
        }
        let sizes: Vec<usize> = participants.iter().map(|p| p.shard.len()).collect();
        let weights = AggregationWeights::from_shard_sizes(&sizes)?;
        let state = OptimizerState::new(cfg.optimizer, cfg.eta, layout.param_count())?;
        broadcast(&init, &mut participants)?;
        Ok(Self {
            layout,
            global: init,
            participants,
            weights,
            state,
            cfg,
            epoch: 0,
        })
    }

    pub fn global_params(&self) -> &ParamVector {
        &self.global
    }

    pub fn participants(&self) -> &[Participant] {
        &self.participants
    }

    pub fn weights(&self) -> &AggregationWeights {
        &self.weights
    }

    pub fn layout(&self) -> &CircuitLayout {
        &self.layout
    }

    pub fn epochs_done(&self) -> usize {
        self.epoch
    }

    fn selection(&self, participant: &Participant) -> Option<Vec<usize>> {
        let size = self.cfg.batch_size?;
        let len = participant.shard.len();
        if size >= len {
            return None;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(((self.epoch as u64) << 24) | participant.id as u64);
        let mut picked = rand::seq::index::sample(&mut rng, len, size).into_vec();
        picked.sort_unstable();
        Some(picked)
    }

    fn gather<T: Send, E: Executor>(
        &self,
        exec: &E,
        job: &(dyn Fn(&Participant) -> Result<T> + Sync),
    ) -> Result<Vec<T>> {
        let results = exec.map(&self.participants, job);
        if results.len() != self.participants.len() {
            return Err(Error::WeightCountMismatch {
                payloads: results.len(),
                weights: self.participants.len(),
            });
        }
        self.participants
            .iter()
            .zip(results)
            .map(|(p, r)| {
                r.map_err(|source| Error::ParticipantFailed {
                    id: p.id,
                    source: Box::new(source),
                })
            })
            .collect()
    }

    /// Every participant evaluates its full shard at the parameters it
    /// currently holds. Returns `(Σ_k w_k·loss_k, [loss_k])`.
    pub fn train_loss<E: Executor>(&self, exec: &E) -> Result<(f64, Vec<f64>)> {
        let spec = self.cfg.loss;
        let losses = self.gather(exec, &|p: &Participant| {
            batch_loss(&p.layout, &p.local_params, &p.shard, &spec)
        })?;
        let total = losses.iter().zip(self.weights.weights()).map(|(l, w)| l * w).sum();
        Ok((total, losses))
    }

    /// Local rounds, aggregation, global update, broadcast. The reported
    /// losses are those of the updated model.
    pub fn run_epoch<E: Executor>(&mut self, exec: &E) -> Result<EpochOutcome> {
        let settings = self.cfg.local_settings();
        let selections: Vec<Option<Vec<usize>>> = self.participants.iter().map(|p| self.selection(p)).collect();
        let ids: Vec<usize> = self.participants.iter().map(Participant::id).collect();
        let payloads = self.gather(exec, &|p: &Participant| {
            let k = ids.binary_search(&p.id).unwrap_or(0);
            local_round(p, &settings, selections[k].as_deref())
        })?;
        let aggregated = aggregate(&payloads, &self.weights)?;
        if !aggregated.is_finite() {
            return Err(Error::NonFinite("aggregated gradient"));
        }
        self.state.step(&mut self.global, &aggregated)?;
        if !self.global.is_finite() {
            return Err(Error::NonFinite("global parameters"));
        }
        broadcast(&self.global, &mut self.participants)?;
        self.epoch += 1;
        let (train_loss, participant_losses) = self.train_loss(exec)?;
        Ok(EpochOutcome {
            train_loss,
            participant_losses,
        })
    }
}

/// Fraction of `data` whose predicted class matches the label.
pub fn evaluate_accuracy(layout: &CircuitLayout, params: &[f64], data: &[FeatureSample], task: Task) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let mut correct = 0usize;
    for sample in data {
        if layout.forward(params, &sample.features, task)?.predicted_class() == sample.class_index {
            correct += 1;
        }
    }
    Ok(correct as f64 / data.len() as f64)
}

/// Runs `cfg.epochs` federated epochs and returns the final global
/// parameters with one record per epoch.
pub fn train_federated<E: Executor, C: Clock + ?Sized>(
    layout: &CircuitLayout,
    init: &ParamVector,
    shards: Vec<Vec<FeatureSample>>,
    test: &[FeatureSample],
    cfg: &TrainConfig,
    exec: &E,
    clock: &C,
) -> Result<(ParamVector, Vec<RoundRecord>)> {
    let mut coordinator = Coordinator::new(layout.clone(), init.clone(), shards, *cfg)?;
    let task = cfg.loss.task();
    let mut history = Vec::with_capacity(cfg.epochs);
    for _ in 0..cfg.epochs {
        let start = clock.seconds();
        let outcome = coordinator.run_epoch(exec)?;
        let epoch = coordinator.epochs_done();
        let test_accuracy = if cfg.evaluate_every > 0 && epoch % cfg.evaluate_every == 0 && !test.is_empty() {
            Some(evaluate_accuracy(layout, coordinator.global_params(), test, task)?)
        } else {
            None
        };
        history.push(RoundRecord {
            epoch,
            global_params: coordinator.global_params().clone(),
            train_loss: outcome.train_loss,
            participant_losses: outcome.participant_losses,
            test_accuracy,
            duration_secs: clock.seconds() - start,
        });
    }
    Ok((coordinator.global, history))
}
