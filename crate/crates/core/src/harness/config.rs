use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agents::{AgentConfig, AgentKind, LossReduction};
use crate::envs::Task;
use crate::error::{Error, Result};

pub const DEFAULT_LOG_EVERY: u64 = 100;

/// Optional replacements for preset hyperparameters, shared by config files and CLI flags.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub steps: Option<u64>,
    pub buffer_size: Option<usize>,
    pub lr: Option<f64>,
    pub lambda_start: Option<f64>,
    pub lambda_end: Option<f64>,
    pub epochs: Option<usize>,
    pub c_target: Option<u64>,
    pub c_current: Option<u64>,
    pub warmup_steps: Option<u64>,
    pub gamma: Option<f64>,
    pub hidden: Option<Vec<usize>>,
    pub loss_reduction: Option<LossReduction>,
}

impl Overrides {
    /// Values set in `other` win.
    pub fn merged_with(&self, other: &Overrides) -> Overrides {
        Overrides {
            steps: other.steps.or(self.steps),
            buffer_size: other.buffer_size.or(self.buffer_size),
            lr: other.lr.or(self.lr),
            lambda_start: other.lambda_start.or(self.lambda_start),
            lambda_end: other.lambda_end.or(self.lambda_end),
            epochs: other.epochs.or(self.epochs),
            c_target: other.c_target.or(self.c_target),
            c_current: other.c_current.or(self.c_current),
            warmup_steps: other.warmup_steps.or(self.warmup_steps),
            gamma: other.gamma.or(self.gamma),
            hidden: other.hidden.clone().or_else(|| self.hidden.clone()),
            loss_reduction: other.loss_reduction.or(self.loss_reduction),
        }
    }

    pub fn apply(&self, cfg: &mut AgentConfig) {
        if let Some(v) = self.steps {
            cfg.total_steps = v;
        }
        if let Some(v) = self.buffer_size {
            cfg.buffer_capacity = v;
        }
        if let Some(v) = self.lr {
            cfg.lr = v;
        }
        if let Some(v) = self.lambda_start {
            cfg.lambda_start = v;
        }
        if let Some(v) = self.lambda_end {
            cfg.lambda_end = v;
        }
        if let Some(v) = self.epochs {
            cfg.epochs = v;
        }
        if let Some(v) = self.c_target {
            cfg.c_target = v;
        }
        if let Some(v) = self.c_current {
            cfg.c_current = v;
        }
        if let Some(v) = self.warmup_steps {
            cfg.warmup_steps = v;
        }
        if let Some(v) = self.gamma {
            cfg.gamma = v;
        }
        if let Some(v) = &self.hidden {
            cfg.hidden = v.clone();
        }
        if let Some(v) = self.loss_reduction {
            cfg.loss_reduction = v;
        }
    }
}

/// A run description as it appears in a JSON config file. Every field is optional.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub task: Option<Task>,
    pub agent: Option<AgentKind>,
    pub seed: Option<u64>,
    pub log_every: Option<u64>,
    pub probe: Option<bool>,
    pub out: Option<PathBuf>,
    #[serde(flatten)]
    pub overrides: Overrides,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// A fully resolved, validated training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub task: Task,
    pub agent: AgentKind,
    pub agent_config: AgentConfig,
    pub seed: u64,
    pub log_every: u64,
    /// Record the greedy action at the MountainCar probe state.
    pub probe: bool,
    pub out_dir: PathBuf,
}

impl RunConfig {
    pub fn from_preset(task: Task, agent: AgentKind, seed: u64, overrides: &Overrides) -> Result<Self> {
        let mut agent_config = AgentConfig::preset(task, agent);
        overrides.apply(&mut agent_config);
        let cfg = RunConfig {
            task,
            agent,
            agent_config,
            seed,
            log_every: DEFAULT_LOG_EVERY,
            probe: task == Task::MountainCar,
            out_dir: PathBuf::from("runs"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.agent_config.validate()?;
        if self.log_every == 0 {
            return Err(Error::Config("log_every must be >= 1".into()));
        }
        if self.probe && self.task != Task::MountainCar {
            return Err(Error::Config(format!(
                "the greedy-action probe is defined for mountain_car only, not {}",
                self.task
            )));
        }
        Ok(())
    }

    pub fn total_steps(&self) -> u64 {
        self.agent_config.total_steps
    }

    /// Run label shared by all seeds of one configuration.
    pub fn label(&self) -> String {
        format!("{}_{}_b{}", self.task, self.agent, self.agent_config.buffer_capacity)
    }

    pub fn metrics_path(&self) -> PathBuf {
        self.out_dir.join(format!("{}_s{}.csv", self.label(), self.seed))
    }
}
