//! Experiment configuration: a TOML file whose fields can be overridden by
//! command-line flags. The resolved form is written to `config.echo`.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use qfl_core::dataset::PoolGrid;
use qfl_core::{GradientMethod, OptimizerKind, PseudoInverseConfig, Task};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum TaskName {
    Binary,
    Ternary,
}

impl TaskName {
    pub fn task(self) -> Task {
        match self {
            TaskName::Binary => Task::Binary,
            TaskName::Ternary => Task::Ternary,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum OptimizerName {
    #[value(alias = "fed-sgd")]
    Sgd,
    #[value(alias = "fed-adagrad")]
    Adagrad,
    #[value(alias = "fed-adam")]
    Adam,
    Fqngd,
}

impl OptimizerName {
    /// Column order used by every sweep output.
    pub const SWEEP_ORDER: [OptimizerName; 4] = [
        OptimizerName::Sgd,
        OptimizerName::Adagrad,
        OptimizerName::Adam,
        OptimizerName::Fqngd,
    ];

    pub fn kind(self) -> OptimizerKind {
        match self {
            OptimizerName::Sgd => OptimizerKind::Sgd,
            OptimizerName::Adagrad => OptimizerKind::Adagrad,
            OptimizerName::Adam => OptimizerKind::Adam,
            OptimizerName::Fqngd => OptimizerKind::Qngd,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            OptimizerName::Sgd => "sgd",
            OptimizerName::Adagrad => "adagrad",
            OptimizerName::Adam => "adam",
            OptimizerName::Fqngd => "fqngd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum GradientName {
    Shift,
    Adjoint,
}

impl GradientName {
    pub fn method(self) -> GradientMethod {
        match self {
            GradientName::Shift => GradientMethod::ParameterShift,
            GradientName::Adjoint => GradientMethod::Adjoint,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionName {
    Iid,
    LabelSkew,
}

/// Per-optimizer learning rates used when `eta` is not set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Etas {
    pub sgd: Option<f64>,
    pub adagrad: Option<f64>,
    pub adam: Option<f64>,
    pub fqngd: Option<f64>,
}

impl Etas {
    pub fn get(&self, name: OptimizerName) -> f64 {
        let set = match name {
            OptimizerName::Sgd => self.sgd,
            OptimizerName::Adagrad => self.adagrad,
            OptimizerName::Adam => self.adam,
            OptimizerName::Fqngd => self.fqngd,
        };
        set.unwrap_or_else(|| name.kind().default_eta())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FedConfig {
    pub task: TaskName,
    pub optimizer: OptimizerName,
    /// Pooling grid `"RxC"`; the circuit has `R·C` qubits.
    pub grid: String,
    pub depth: usize,
    pub participants: usize,
    pub epochs: usize,
    /// Learning rate for `run`; falls back to `etas`.
    pub eta: Option<f64>,
    pub etas: Etas,
    pub pinv_lambda: f64,
    pub svd_cutoff: f64,
    pub seed: Option<u64>,
    /// Stratified cap on the training set; 0 keeps everything.
    pub subsample: usize,
    /// Initial angles are uniform in `[−init_scale, init_scale)`.
    pub init_scale: f64,
    pub batch_size: Option<usize>,
    pub gradient: GradientName,
    pub partition: PartitionName,
    /// Test accuracy every this many epochs; 0 only at the end.
    pub evaluate_every: usize,
    pub loss_threshold: Option<f64>,
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Require the published file sizes and filtered counts.
    pub check_counts: bool,
}

impl Default for FedConfig {
    fn default() -> Self {
        Self {
            task: TaskName::Binary,
            optimizer: OptimizerName::Fqngd,
            grid: "2x4".into(),
            depth: 2,
            participants: 6,
            epochs: 30,
            eta: None,
            etas: Etas::default(),
            pinv_lambda: PseudoInverseConfig::default().reg_lambda,
            svd_cutoff: PseudoInverseConfig::default().svd_cutoff,
            seed: None,
            subsample: 1200,
            init_scale: DEFAULT_INIT_SCALE,
            batch_size: None,
            gradient: GradientName::Shift,
            partition: PartitionName::Iid,
            evaluate_every: 1,
            loss_threshold: None,
            data_dir: PathBuf::from("data/mnist"),
            output_dir: PathBuf::from("out"),
            check_counts: true,
        }
    }
}

pub const DEFAULT_INIT_SCALE: f64 = 1.0;

/// Training-loss level that counts as converged.
pub fn default_threshold(task: TaskName) -> f64 {
    match task {
        TaskName::Binary => 0.35,
        TaskName::Ternary => 0.7,
    }
}

impl FedConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config fields are all TOML-representable")
    }

    pub fn pool_grid(&self) -> Result<PoolGrid> {
        let bad = || CliError::Config(format!("grid {:?} is not of the form RxC", self.grid));
        let (r, c) = self.grid.split_once(['x', 'X']).ok_or_else(bad)?;
        let rows = r.trim().parse().map_err(|_| bad())?;
        let cols = c.trim().parse().map_err(|_| bad())?;
        Ok(PoolGrid::new(rows, cols)?)
    }

    pub fn pinv(&self) -> Result<PseudoInverseConfig> {
        Ok(PseudoInverseConfig::new(self.pinv_lambda, self.svd_cutoff)?)
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| CliError::Config("a seed is required (--seed, or `seed` in the config file)".into()))
    }

    /// Learning rate for the configured optimizer.
    pub fn learning_rate(&self) -> f64 {
        self.eta.unwrap_or_else(|| self.etas.get(self.optimizer))
    }

    pub fn threshold(&self) -> f64 {
        self.loss_threshold.unwrap_or_else(|| default_threshold(self.task))
    }

    /// Checks every field and fills in the derived ones, so the echo of
    /// the result reproduces the run without consulting any defaults.
    pub fn resolve(mut self) -> Result<Self> {
        self.seed()?;
        self.pool_grid()?;
        self.pinv()?;
        if self.depth == 0 {
            return Err(CliError::Config("depth must be at least 1".into()));
        }
        if self.participants == 0 {
            return Err(CliError::Config("participants must be at least 1".into()));
        }
        if self.batch_size == Some(0) {
            return Err(CliError::Config("batch_size must be positive".into()));
        }
        if !(self.init_scale.is_finite() && self.init_scale >= 0.0) {
            return Err(CliError::Config(format!(
                "init_scale {} must be finite and ≥ 0",
                self.init_scale
            )));
        }
        let eta = self.learning_rate();
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(CliError::Config(format!("learning rate {eta} must be finite and ≥ 0")));
        }
        let threshold = self.threshold();
        if !(threshold.is_finite() && threshold > 0.0) {
            return Err(CliError::Config(format!("loss threshold {threshold} must be positive")));
        }
        self.eta = Some(eta);
        self.loss_threshold = Some(threshold);
        Ok(self)
    }
}

/// Flags shared by `run`, `sweep` and `metric`; each one overrides the
/// matching config-file field.
#[derive(Debug, Clone, Default, Args)]
pub struct ConfigArgs {
    /// TOML configuration file.
    #[arg(long, short = 'c')]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub task: Option<TaskName>,
    #[arg(long, value_enum)]
    pub optimizer: Option<OptimizerName>,
    /// Pooling grid, e.g. 2x4.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub depth: Option<usize>,
    /// Number of participants K.
    #[arg(long, short = 'k')]
    pub participants: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub eta_sgd: Option<f64>,
    #[arg(long)]
    pub eta_adagrad: Option<f64>,
    #[arg(long)]
    pub eta_adam: Option<f64>,
    #[arg(long)]
    pub eta_fqngd: Option<f64>,
    /// Tikhonov shift added to each metric block (0 selects the spectral
    /// pseudo-inverse).
    #[arg(long)]
    pub pinv_lambda: Option<f64>,
    #[arg(long)]
    pub svd_cutoff: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stratified training-set cap; 0 uses the whole filtered set.
    #[arg(long)]
    pub subsample: Option<usize>,
    #[arg(long)]
    pub init_scale: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long, value_enum)]
    pub gradient: Option<GradientName>,
    #[arg(long, value_enum)]
    pub partition: Option<PartitionName>,
    #[arg(long)]
    pub evaluate_every: Option<usize>,
    #[arg(long)]
    pub loss_threshold: Option<f64>,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    #[arg(long, short = 'o')]
    pub output_dir: Option<PathBuf>,
    /// Accept MNIST files whose sizes differ from the published ones.
    #[arg(long)]
    pub skip_count_check: bool,
}

impl ConfigArgs {
    pub fn build(&self) -> Result<FedConfig> {
        let mut cfg = match &self.config {
            Some(path) => FedConfig::load(path)?,
            None => FedConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &self.$field {
                    cfg.$field = v.clone();
                }
            )*};
        }
        set!(
            task,
            optimizer,
            grid,
            depth,
            participants,
            epochs,
            pinv_lambda,
            svd_cutoff,
            subsample,
            init_scale
        );
        set!(gradient, partition, evaluate_every, data_dir, output_dir);
        if self.eta.is_some() {
            cfg.eta = self.eta;
        }
        if self.seed.is_some() {
            cfg.seed = self.seed;
        }
        if self.batch_size.is_some() {
            cfg.batch_size = self.batch_size;
        }
        if self.loss_threshold.is_some() {
            cfg.loss_threshold = self.loss_threshold;
        }
        for (flag, slot) in [
            (self.eta_sgd, &mut cfg.etas.sgd),
            (self.eta_adagrad, &mut cfg.etas.adagrad),
            (self.eta_adam, &mut cfg.etas.adam),
            (self.eta_fqngd, &mut cfg.etas.fqngd),
        ] {
            if flag.is_some() {
                *slot = flag;
            }
        }
        if self.skip_count_check {
            cfg.check_counts = false;
        }
        Ok(cfg)
    }
}
