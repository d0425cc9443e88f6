//! Run configuration: the single source of truth echoed into every
//! checkpoint and metrics file.
//!
//! Resolution order: built-in defaults, then `--config <file.json>`, then
//! explicit command-line flags, then the `KGAM_SEED` environment variable.

use serde::{Deserialize, Serialize};

use kgam_core::kgam::{OuterMode, Task};
use kgam_core::koppen::{DeltaMode, KoppenError, KstParams};
use kgam_core::neural::{Mlp, OptimizerKind, TrainConfig};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Regression,
    Classification,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    Friedman { n: usize, seed: u64, noise_sd: f64 },
    Iris { path: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LambdaSpec {
    Sprecher,
    Geometric { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DeltaSpec {
    Index,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterSpec {
    Shared,
    PerChannel,
    Badic { base: u32 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerSpec {
    Sgd,
    SgdMomentum,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskKind,
    pub dataset: DatasetSpec,
    pub gamma: u32,
    pub k_digits: u32,
    /// Branching parameter of `beta(r)`; defaults to the input dimension.
    pub n_beta: Option<u32>,
    pub lambda: LambdaSpec,
    pub delta: DeltaSpec,
    pub outer: OuterSpec,
    pub hidden_width: usize,
    pub hidden_depth: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub optimizer: OptimizerSpec,
    pub seed: u64,
    /// Rows in the training split; `None` trains on everything.
    pub train_n: Option<usize>,
    /// Seed of the split shuffle; defaults to `seed`.
    pub split_seed: Option<u64>,
}

impl RunConfig {
    /// The Iris classification experiment: 7 channels, k = 6, 105/45 split.
    pub fn iris_default(path: &str) -> Self {
        Self {
            task: TaskKind::Classification,
            dataset: DatasetSpec::Iris { path: path.to_string() },
            gamma: 10,
            k_digits: 6,
            n_beta: None,
            lambda: LambdaSpec::Sprecher,
            delta: DeltaSpec::Index,
            outer: OuterSpec::PerChannel,
            hidden_width: 16,
            hidden_depth: 3,
            learning_rate: 5e-3,
            epochs: 500,
            batch_size: 16,
            momentum: 0.9,
            optimizer: OptimizerSpec::SgdMomentum,
            seed: 2,
            train_n: Some(105),
            split_seed: None,
        }
    }

    /// The simulated-data regression experiment: 11 channels, width 16
    /// per-channel nets.
    pub fn friedman_default() -> Self {
        Self {
            task: TaskKind::Regression,
            dataset: DatasetSpec::Friedman { n: 100, seed: 20240601, noise_sd: 1.0 },
            gamma: 10,
            k_digits: 6,
            n_beta: None,
            lambda: LambdaSpec::Geometric { lambda: 0.5 },
            delta: DeltaSpec::Index,
            outer: OuterSpec::PerChannel,
            hidden_width: 16,
            hidden_depth: 5,
            learning_rate: 2e-4,
            epochs: 2000,
            batch_size: 8,
            momentum: 0.9,
            optimizer: OptimizerSpec::SgdMomentum,
            seed: 1,
            train_n: None,
            split_seed: None,
        }
    }

    /// Input dimension implied by the dataset choice.
    pub fn input_dim(&self) -> usize {
        match self.dataset {
            DatasetSpec::Friedman { .. } => 5,
            DatasetSpec::Iris { .. } => 3,
        }
    }

    pub fn kst_params(&self) -> Result<KstParams, KoppenError> {
        let d = self.input_dim();
        let n_beta = self.n_beta.unwrap_or(d.max(1) as u32);
        let params = match self.lambda {
            LambdaSpec::Sprecher => KstParams::sprecher(d, self.gamma, n_beta, self.k_digits)?,
            LambdaSpec::Geometric { lambda } => {
                KstParams::geometric(d, self.gamma, lambda, self.k_digits)?.with_n_beta(n_beta)?
            }
        };
        Ok(params.with_delta_mode(match self.delta {
            DeltaSpec::Index => DeltaMode::Index,
            DeltaSpec::Zero => DeltaMode::Zero,
        }))
    }

    pub fn task(&self) -> Task {
        match self.task {
            TaskKind::Regression => Task::Regression,
            TaskKind::Classification => Task::BinaryClassification,
        }
    }

    pub fn outer_mode(&self) -> OuterMode {
        match self.outer {
            OuterSpec::Shared => OuterMode::SharedG,
            OuterSpec::PerChannel => OuterMode::PerChannelG,
            OuterSpec::Badic { base } => OuterMode::BadicSingleG { base },
        }
    }

    pub fn net_dims(&self) -> Vec<usize> {
        Mlp::layer_dims(self.hidden_width, self.hidden_depth)
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.epochs,
            batch_size: self.batch_size,
            momentum: self.momentum,
            seed: self.seed,
            optimizer: match self.optimizer {
                OptimizerSpec::Sgd => OptimizerKind::Sgd,
                OptimizerSpec::SgdMomentum => OptimizerKind::SgdMomentum,
            },
        }
    }

    pub fn split_seed(&self) -> u64 {
        self.split_seed.unwrap_or(self.seed)
    }

    /// Applies the `KGAM_SEED` environment override.
    pub fn apply_env_seed(&mut self) -> Result<(), CliError> {
        if let Ok(raw) = std::env::var("KGAM_SEED") {
            let seed: u64 = raw
                .parse()
                .map_err(|_| CliError::usage(format!("KGAM_SEED must be an integer, got {raw:?}")))?;
            self.seed = seed;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if (self.gamma as u64) < self.input_dim() as u64 + 2 {
            return Err(CliError::usage(format!(
                "gamma must be >= d + 2 = {}, got {}",
                self.input_dim() + 2,
                self.gamma
            )));
        }
        if let OuterSpec::Badic { base } = self.outer {
            if base < 2 {
                return Err(CliError::usage("badic base must be >= 2".to_string()));
            }
        }
        if self.hidden_width == 0 || self.hidden_depth == 0 {
            return Err(CliError::usage("hidden width and depth must be >= 1".to_string()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(CliError::usage("learning rate must be positive".to_string()));
        }
        if self.batch_size == 0 {
            return Err(CliError::usage("batch size must be >= 1".to_string()));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(CliError::usage("momentum must lie in [0, 1)".to_string()));
        }
        Ok(())
    }
}
