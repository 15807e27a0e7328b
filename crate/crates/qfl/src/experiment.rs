//! `run` and `sweep`: data preparation, federated training and the output
//! directory layout.

use std::fs;
use std::path::{Path, PathBuf};

use qfl_core::dataset::{
    filter_digits, partition_equal, partition_label_skew, pool_features, stratified_subsample, LabeledImage,
};
use qfl_core::federated::{evaluate_accuracy, Clock, Coordinator, Executor, RoundRecord, TrainConfig};
use qfl_core::{CircuitLayout, FeatureSample, LossSpec, ParamVector, Task};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::circuit_file;
use crate::config::{FedConfig, OptimizerName, PartitionName};
use crate::error::{CliError, Result};
use crate::executor::{Parallel, SystemClock};
use crate::mnist::{expected_counts, load_split, Split};
use crate::params_file;
use crate::telemetry::{epochs_to_threshold, write_history, write_timing};

/// Independent random streams derived from the run seed.
#[derive(Debug, Clone, Copy)]
enum Stream {
    Subsample = 1,
    Partition = 2,
    Init = 3,
    Minibatch = 4,
}

fn derived_seed(seed: u64, stream: Stream) -> u64 {
    seed ^ (stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

pub struct MnistData {
    pub train: Vec<LabeledImage>,
    pub test: Vec<LabeledImage>,
}

impl MnistData {
    pub fn load(dir: &Path, check_counts: bool) -> Result<Self> {
        let train = load_split(dir, Split::Train)?;
        let test = load_split(dir, Split::Test)?;
        if check_counts {
            for (split, got) in [(Split::Train, train.len()), (Split::Test, test.len())] {
                if got != split.official_size() {
                    return Err(CliError::Data(format!(
                        "{split:?} split has {got} items, the published files have {} \
                         (pass --skip-count-check for other data)",
                        split.official_size()
                    )));
                }
            }
        }
        Ok(Self { train, test })
    }
}

/// Everything a run needs, fixed by the data and the seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub task: Task,
    pub layout: CircuitLayout,
    pub shards: Vec<Vec<FeatureSample>>,
    /// Training-file positions of every shard's samples.
    pub shard_sources: Vec<Vec<usize>>,
    pub test: Vec<FeatureSample>,
    pub init: ParamVector,
    pub train_filtered: usize,
    pub test_filtered: usize,
}

impl Prepared {
    pub fn shard_hash(&self) -> String {
        let mut h = Sha256::new();
        for shard in &self.shard_sources {
            for &i in shard {
                h.update((i as u64).to_le_bytes());
            }
            h.update(u64::MAX.to_le_bytes());
        }
        format!("{:x}", h.finalize())
    }

    pub fn train_samples(&self) -> usize {
        self.shards.iter().map(Vec::len).sum()
    }
}

pub fn prepare(cfg: &FedConfig, data: &MnistData) -> Result<Prepared> {
    let seed = cfg.seed()?;
    let task = cfg.task.task();
    let grid = cfg.pool_grid()?;
    let train = filter_digits(&data.train, task.digits())?;
    let test = filter_digits(&data.test, task.digits())?;
    if cfg.check_counts {
        let expected = expected_counts(task);
        if (train.len(), test.len()) != expected {
            return Err(CliError::Data(format!(
                "{} task filtered to {}/{} train/test samples, expected {}/{}",
                task.name(),
                train.len(),
                test.len(),
                expected.0,
                expected.1
            )));
        }
    }
    let classes: Vec<usize> = train.iter().map(|f| f.class_index).collect();
    let keep = if cfg.subsample == 0 {
        (0..train.len()).collect()
    } else {
        stratified_subsample(&classes, cfg.subsample, derived_seed(seed, Stream::Subsample))
    };
    let used: Vec<(usize, FeatureSample)> = keep
        .iter()
        .map(|&i| {
            let f = &train[i];
            (
                f.source_index,
                FeatureSample::new(pool_features(&f.image, grid), f.class_index),
            )
        })
        .collect();
    let split = match cfg.partition {
        PartitionName::Iid => partition_equal(&used, cfg.participants, derived_seed(seed, Stream::Partition))?,
        PartitionName::LabelSkew => {
            let labels: Vec<usize> = used.iter().map(|(_, s)| s.class_index).collect();
            partition_label_skew(&used, &labels, cfg.participants)?
        }
    };
    let shard_sources = split.iter().map(|s| s.iter().map(|(i, _)| *i).collect()).collect();
    let shards = split
        .into_iter()
        .map(|s| s.into_iter().map(|(_, x)| x).collect())
        .collect();
    let test_filtered = test.len();
    let test = test
        .iter()
        .map(|f| FeatureSample::new(pool_features(&f.image, grid), f.class_index))
        .collect();
    let layout = CircuitLayout::standard(grid.features(), cfg.depth)?;
    let init = ParamVector::random(layout.param_count(), cfg.init_scale, derived_seed(seed, Stream::Init));
    Ok(Prepared {
        task,
        layout,
        shards,
        shard_sources,
        test,
        init,
        train_filtered: train.len(),
        test_filtered,
    })
}

/// Outcome of one training run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<RoundRecord>,
    pub initial_loss: f64,
    pub initial_accuracy: f64,
    pub final_params: ParamVector,
    pub final_accuracy: f64,
}

impl RunOutcome {
    pub fn final_loss(&self) -> f64 {
        self.records.last().map_or(self.initial_loss, |r| r.train_loss)
    }

    pub fn epochs_to(&self, threshold: f64) -> Option<usize> {
        epochs_to_threshold(
            self.initial_loss,
            self.records.iter().map(|r| (r.epoch, r.train_loss)),
            threshold,
        )
    }
}

pub fn train_config(cfg: &FedConfig) -> Result<TrainConfig> {
    let mut tc = TrainConfig::new(cfg.optimizer.kind(), cfg.task.task());
    tc.eta = cfg.learning_rate();
    tc.pinv = cfg.pinv()?;
    tc.loss = LossSpec::for_task(cfg.task.task());
    tc.method = cfg.gradient.method();
    tc.epochs = cfg.epochs;
    tc.batch_size = cfg.batch_size;
    tc.seed = derived_seed(cfg.seed()?, Stream::Minibatch);
    tc.evaluate_every = cfg.evaluate_every;
    Ok(tc)
}

/// Federated training on prepared data. Test accuracy is evaluated every
/// `evaluate_every` epochs and always after the last one.
pub fn train<E: Executor, C: Clock>(cfg: &FedConfig, prepared: &Prepared, exec: &E, clock: &C) -> Result<RunOutcome> {
    let tc = train_config(cfg)?;
    let task = prepared.task;
    let mut coordinator = Coordinator::new(
        prepared.layout.clone(),
        prepared.init.clone(),
        prepared.shards.clone(),
        tc,
    )?;
    let (initial_loss, _) = coordinator.train_loss(exec)?;
    let accuracy = |p: &[f64]| evaluate_accuracy(&prepared.layout, p, &prepared.test, task);
    let initial_accuracy = accuracy(&prepared.init)?;
    let mut records = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = clock.seconds();
        let outcome = coordinator.run_epoch(exec)?;
        let due = (cfg.evaluate_every > 0 && epoch % cfg.evaluate_every == 0) || epoch == cfg.epochs;
        let test_accuracy = if due {
            Some(accuracy(coordinator.global_params())?)
        } else {
            None
        };
        log::info!(
            "{} epoch {epoch}/{}: loss {:.5}{}",
            cfg.optimizer.as_str(),
            cfg.epochs,
            outcome.train_loss,
            test_accuracy
                .map(|a| format!(", test accuracy {a:.4}"))
                .unwrap_or_default()
        );
        records.push(RoundRecord {
            epoch,
            global_params: coordinator.global_params().clone(),
            train_loss: outcome.train_loss,
            participant_losses: outcome.participant_losses,
            test_accuracy,
            duration_secs: clock.seconds() - start,
        });
    }
    let final_params = coordinator.global_params().clone();
    let final_accuracy = match records.last().and_then(|r| r.test_accuracy) {
        Some(a) => a,
        None => initial_accuracy,
    };
    Ok(RunOutcome {
        records,
        initial_loss,
        initial_accuracy,
        final_params,
        final_accuracy,
    })
}

/// Contents of `result.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub task: String,
    pub optimizer: String,
    pub seed: u64,
    pub eta: f64,
    pub epochs: usize,
    pub participants: usize,
    pub qubits: usize,
    pub param_count: usize,
    pub train_samples: usize,
    pub test_samples: usize,
    pub shard_sizes: Vec<usize>,
    pub shard_hash: String,
    pub initial_train_loss: f64,
    pub initial_test_accuracy: f64,
    pub final_train_loss: f64,
    pub test_accuracy: f64,
    pub loss_threshold: f64,
    pub epochs_to_threshold: Option<usize>,
}

fn run_result(cfg: &FedConfig, prepared: &Prepared, outcome: &RunOutcome) -> Result<RunResult> {
    Ok(RunResult {
        task: cfg.task.task().name().into(),
        optimizer: cfg.optimizer.as_str().into(),
        seed: cfg.seed()?,
        eta: cfg.learning_rate(),
        epochs: cfg.epochs,
        participants: cfg.participants,
        qubits: prepared.layout.n_qubits(),
        param_count: prepared.layout.param_count(),
        train_samples: prepared.train_samples(),
        test_samples: prepared.test.len(),
        shard_sizes: prepared.shards.iter().map(Vec::len).collect(),
        shard_hash: prepared.shard_hash(),
        initial_train_loss: outcome.initial_loss,
        initial_test_accuracy: outcome.initial_accuracy,
        final_train_loss: outcome.final_loss(),
        test_accuracy: outcome.final_accuracy,
        loss_threshold: cfg.threshold(),
        epochs_to_threshold: outcome.epochs_to(cfg.threshold()),
    })
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

/// Writes the files of one run into `dir`, which must exist.
fn write_run(dir: &Path, cfg: &FedConfig, prepared: &Prepared, outcome: &RunOutcome) -> Result<RunResult> {
    let result = run_result(cfg, prepared, outcome)?;
    write_history(&dir.join("history.csv"), cfg.participants, &outcome.records)?;
    write_timing(&dir.join("timing.csv"), &outcome.records)?;
    write(&dir.join("config.echo"), cfg.to_toml())?;
    write(&dir.join("circuit.txt"), circuit_file::render(&prepared.layout))?;
    write(&dir.join("params.bin"), params_file::encode(&outcome.final_params))?;
    let json = serde_json::to_string_pretty(&result).expect("result is serialisable");
    write(&dir.join("result.json"), json + "\n")?;
    Ok(result)
}

/// A scratch directory next to the destination; removed on drop unless
/// committed.
struct Staging {
    dir: PathBuf,
    committed: bool,
}

impl Staging {
    fn new(out: &Path) -> Result<Self> {
        let name = out
            .file_name()
            .ok_or_else(|| CliError::Config(format!("output directory {} has no name", out.display())))?;
        let parent = out
            .parent()
            .filter(|p| !p.as_os_str().is_empty())
            .unwrap_or(Path::new("."));
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
        let dir = parent.join(format!(".{}.staging-{}", name.to_string_lossy(), std::process::id()));
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
        }
        fs::create_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        Ok(Self { dir, committed: false })
    }

    /// Replaces `out` with the staged tree. An existing `out` must be empty
    /// or hold a previous output identified by `marker`.
    fn commit(mut self, out: &Path, marker: &str) -> Result<()> {
        if out.exists() {
            let empty = fs::read_dir(out).map_err(|e| CliError::io(out, e))?.next().is_none();
            if !empty && !out.join(marker).is_file() {
                return Err(CliError::Config(format!(
                    "{} exists and does not look like a previous output (no {marker})",
                    out.display()
                )));
            }
            fs::remove_dir_all(out).map_err(|e| CliError::io(out, e))?;
        }
        fs::rename(&self.dir, out).map_err(|e| CliError::io(out, e))?;
        self.committed = true;
        Ok(())
    }
}

impl Drop for Staging {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.dir);
        }
    }
}

/// Resolves `cfg`, trains, and writes the run directory.
pub fn run(cfg: FedConfig) -> Result<RunResult> {
    let cfg = cfg.resolve()?;
    let data = MnistData::load(&cfg.data_dir, cfg.check_counts)?;
    let prepared = prepare(&cfg, &data)?;
    run_prepared(&cfg, &prepared, &cfg.output_dir)
}

pub fn run_prepared(cfg: &FedConfig, prepared: &Prepared, out: &Path) -> Result<RunResult> {
    let staging = Staging::new(out)?;
    let outcome = train(cfg, prepared, &Parallel, &SystemClock::default())?;
    let result = write_run(&staging.dir, cfg, prepared, &outcome)?;
    staging.commit(out, "result.json")?;
    Ok(result)
}

/// Contents of `sweep.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub task: String,
    pub seed: u64,
    pub shard_hash: String,
    pub loss_threshold: f64,
    pub runs: Vec<RunResult>,
    /// FQNGD reached the threshold, and no baseline reached it sooner.
    pub fqngd_fastest: bool,
}

impl SweepSummary {
    pub fn result(&self, name: OptimizerName) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.optimizer == name.as_str())
    }
}

/// `fqngd` reaches the threshold and no other optimizer gets there in
/// fewer epochs.
pub fn fqngd_fastest(runs: &[RunResult]) -> bool {
    let fq = runs.iter().find(|r| r.optimizer == OptimizerName::Fqngd.as_str());
    let Some(Some(fq_epochs)) = fq.map(|r| r.epochs_to_threshold) else {
        return false;
    };
    runs.iter()
        .filter(|r| r.optimizer != OptimizerName::Fqngd.as_str())
        .all(|r| r.epochs_to_threshold.is_none_or(|e| e >= fq_epochs))
}

/// Trains all four optimizers on the same shards and initial parameters,
/// at most `jobs` at a time, and writes one subdirectory per optimizer plus
/// `comparison.csv`, `accuracy_table.csv` and `sweep.json`.
pub fn sweep(cfg: FedConfig, jobs: usize) -> Result<SweepSummary> {
    let mut cfg = cfg;
    if cfg.eta.take().is_some() {
        log::warn!("sweep ignores `eta`; set per-optimizer rates with --eta-<optimizer> or [etas]");
    }
    let base = cfg.resolve()?;
    let data = MnistData::load(&base.data_dir, base.check_counts)?;
    let prepared = prepare(&base, &data)?;
    sweep_prepared(&base, &prepared, jobs, &base.output_dir)
}

pub fn sweep_prepared(base: &FedConfig, prepared: &Prepared, jobs: usize, out: &Path) -> Result<SweepSummary> {
    let staging = Staging::new(out)?;
    let configs: Vec<FedConfig> = OptimizerName::SWEEP_ORDER
        .iter()
        .map(|&o| {
            FedConfig {
                optimizer: o,
                eta: None,
                ..base.clone()
            }
            .resolve()
        })
        .collect::<Result<_>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    let outcomes: Vec<RunOutcome> = pool.install(|| {
        configs
            .par_iter()
            .map(|c| train(c, prepared, &Parallel, &SystemClock::default()))
            .collect::<Result<_>>()
    })?;
    let mut runs = Vec::with_capacity(4);
    for (c, outcome) in configs.iter().zip(&outcomes) {
        let dir = staging.dir.join(c.optimizer.as_str());
        fs::create_dir(&dir).map_err(|e| CliError::io(&dir, e))?;
        runs.push(write_run(&dir, c, prepared, outcome)?);
    }
    write_comparison(&staging.dir.join("comparison.csv"), &outcomes)?;
    write_accuracy_table(&staging.dir.join("accuracy_table.csv"), &runs)?;
    let summary = SweepSummary {
        task: prepared.task.name().into(),
        seed: base.seed()?,
        shard_hash: prepared.shard_hash(),
        loss_threshold: base.threshold(),
        fqngd_fastest: fqngd_fastest(&runs),
        runs,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary is serialisable");
    write(&staging.dir.join("sweep.json"), json + "\n")?;
    staging.commit(out, "sweep.json")?;
    Ok(summary)
}

/// `epoch,sgd,adagrad,adam,fqngd`: training loss per epoch, epoch 0 being
/// the shared initial model.
fn write_comparison(path: &Path, outcomes: &[RunOutcome]) -> Result<()> {
    let mut text = String::from("epoch");
    for o in OptimizerName::SWEEP_ORDER {
        text.push(',');
        text.push_str(o.as_str());
    }
    text.push('\n');
    let epochs = outcomes.iter().map(|o| o.records.len()).max().unwrap_or(0);
    for e in 0..=epochs {
        text.push_str(&e.to_string());
        for o in outcomes {
            let loss = if e == 0 {
                Some(o.initial_loss)
            } else {
                o.records.get(e - 1).map(|r| r.train_loss)
            };
            text.push(',');
            text.push_str(&loss.map(|l| l.to_string()).unwrap_or_default());
        }
        text.push('\n');
    }
    write(path, text)
}

/// `metric,sgd,adagrad,adam,fqngd` with rows `test_accuracy`,
/// `final_train_loss` and `epochs_to_threshold` (empty if never reached).
fn write_accuracy_table(path: &Path, runs: &[RunResult]) -> Result<()> {
    let mut text = String::from("metric");
    for r in runs {
        text.push(',');
        text.push_str(&r.optimizer);
    }
    text.push('\n');
    type Cell = fn(&RunResult) -> String;
    let rows: [(&str, Cell); 3] = [
        ("test_accuracy", |r| r.test_accuracy.to_string()),
        ("final_train_loss", |r| r.final_train_loss.to_string()),
        ("epochs_to_threshold", |r| {
            r.epochs_to_threshold.map(|e| e.to_string()).unwrap_or_default()
        }),
    ];
    for (name, cell) in rows {
        text.push_str(name);
        for r in runs {
            text.push(',');
            text.push_str(&cell(r));
        }
        text.push('\n');
    }
    write(path, text)
}

/// Block-diagonal metric of one training sample, as JSON. With `run_dir`
/// the trained circuit and parameters of that run are used, otherwise the
/// initial parameters of `cfg`.
pub fn metric_report(cfg: FedConfig, run_dir: Option<&Path>, sample: usize) -> Result<String> {
    let cfg = cfg.resolve()?;
    let data = MnistData::load(&cfg.data_dir, cfg.check_counts)?;
    let prepared = prepare(&cfg, &data)?;
    let (layout, params) = match run_dir {
        Some(dir) => {
            let circuit = dir.join("circuit.txt");
            let text = fs::read_to_string(&circuit).map_err(|e| CliError::io(&circuit, e))?;
            let params = dir.join("params.bin");
            let bytes = fs::read(&params).map_err(|e| CliError::io(&params, e))?;
            (circuit_file::parse(&text)?, params_file::decode(&bytes)?)
        }
        None => (prepared.layout.clone(), prepared.init.clone()),
    };
    let all: Vec<&FeatureSample> = prepared.shards.iter().flatten().collect();
    let x = all
        .get(sample)
        .ok_or_else(|| CliError::Config(format!("sample {sample} out of range (training set has {})", all.len())))?;
    let blocks = qfl_core::metric::metric_for_sample(&layout, &params, &x.features)?;
    let layers: Vec<serde_json::Value> = blocks
        .blocks()
        .iter()
        .enumerate()
        .map(|(l, b)| {
            let n = b.dim();
            let rows: Vec<&[f64]> = b.entries().chunks(n.max(1)).collect();
            serde_json::json!({
                "layer": l + 1,
                "slots": [layout.layer_slots(l).start, layout.layer_slots(l).end],
                "matrix": rows,
                "eigenvalues": b.eigenvalues(),
            })
        })
        .collect();
    let report = serde_json::json!({
        "sample": sample,
        "class_index": x.class_index,
        "features": x.features,
        "layers": layers,
    });
    Ok(serde_json::to_string_pretty(&report).expect("report is serialisable"))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(optimizer: &str, epochs: Option<usize>) -> RunResult {
        RunResult {
            task: "binary".into(),
            optimizer: optimizer.into(),
            seed: 0,
            eta: 0.1,
            epochs: 30,
            participants: 6,
            qubits: 8,
            param_count: 48,
            train_samples: 1200,
            test_samples: 1924,
            shard_sizes: vec![200; 6],
            shard_hash: String::new(),
            initial_train_loss: 0.7,
            initial_test_accuracy: 0.5,
            final_train_loss: 0.3,
            test_accuracy: 0.9,
            loss_threshold: 0.35,
            epochs_to_threshold: epochs,
        }
    }

    #[test]
    fn fastest_rule() {
        let runs = |fq| {
            vec![
                result("sgd", None),
                result("adagrad", Some(9)),
                result("adam", Some(5)),
                result("fqngd", fq),
            ]
        };
        assert!(fqngd_fastest(&runs(Some(5))));
        assert!(fqngd_fastest(&runs(Some(2))));
        assert!(!fqngd_fastest(&runs(Some(6))));
        assert!(!fqngd_fastest(&runs(None)));
    }

    #[test]
    fn derived_seeds_differ() {
        let s = [Stream::Subsample, Stream::Partition, Stream::Init, Stream::Minibatch].map(|k| derived_seed(7, k));
        for i in 0..4 {
            for j in i + 1..4 {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
