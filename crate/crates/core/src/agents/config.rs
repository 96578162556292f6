use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{EpsilonSchedule, LambdaSchedule};
use crate::envs::Task;
use crate::error::{Error, Result};
use crate::nn::OptimizerKind;

/// The learners. `DqnS` is DQN with a one-mini-batch buffer and its own tuned settings.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentKind {
    Dqn,
    DqnS,
    MedqnU,
    MedqnR,
}

impl AgentKind {
    pub const ALL: [AgentKind; 4] = [
        AgentKind::Dqn,
        AgentKind::DqnS,
        AgentKind::MedqnU,
        AgentKind::MedqnR,
    ];

    pub fn name(self) -> &'static str {
        match self {
            AgentKind::Dqn => "dqn",
            AgentKind::DqnS => "dqn_s",
            AgentKind::MedqnU => "medqn_u",
            AgentKind::MedqnR => "medqn_r",
        }
    }

    pub fn consolidates(self) -> bool {
        matches!(self, AgentKind::MedqnU | AgentKind::MedqnR)
    }
}

impl fmt::Display for AgentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm: String = s
            .to_ascii_lowercase()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect();
        match norm.as_str() {
            "dqn" => Ok(AgentKind::Dqn),
            "dqns" => Ok(AgentKind::DqnS),
            "medqnu" => Ok(AgentKind::MedqnU),
            "medqnr" => Ok(AgentKind::MedqnR),
            _ => Err(Error::Config(format!("unknown agent '{s}'"))),
        }
    }
}

/// Normalization of the two loss terms.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossReduction {
    /// Element-wise means: squared TD errors averaged over the batch, consolidation gaps
    /// averaged over states and actions. The λ presets are calibrated for this scale.
    #[default]
    Mean,
    /// Squared TD errors summed over the batch; consolidation gaps summed over actions and
    /// averaged over states.
    Sum,
}

impl fmt::Display for LossReduction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossReduction::Mean => "mean",
            LossReduction::Sum => "sum",
        })
    }
}

impl FromStr for LossReduction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(LossReduction::Mean),
            "sum" => Ok(LossReduction::Sum),
            _ => Err(Error::Config(format!("unknown loss reduction '{s}'"))),
        }
    }
}

/// Every hyperparameter of a learner.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub gamma: f64,
    pub lr: f64,
    pub optimizer: OptimizerKind,
    pub hidden: Vec<usize>,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    pub c_target: u64,
    pub c_current: u64,
    pub epochs: usize,
    pub lambda_start: f64,
    pub lambda_end: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    pub total_steps: u64,
    pub warmup_steps: u64,
    #[serde(default)]
    pub loss_reduction: LossReduction,
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if !(0.0..1.0).contains(&self.gamma) {
            return fail(format!("gamma must lie in [0, 1), got {}", self.gamma));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return fail(format!("lr must be finite and >= 0, got {}", self.lr));
        }
        if self.epochs == 0 {
            return fail("epochs must be >= 1".into());
        }
        if !(self.lambda_start >= 0.0 && self.lambda_start <= self.lambda_end && self.lambda_end.is_finite()) {
            return fail(format!(
                "lambda schedule must satisfy 0 <= start <= end, got {} -> {}",
                self.lambda_start, self.lambda_end
            ));
        }
        if !(0.0..=1.0).contains(&self.epsilon_end)
            || !(0.0..=1.0).contains(&self.epsilon_start)
            || self.epsilon_end > self.epsilon_start
        {
            return fail(format!(
                "epsilon schedule must satisfy 0 <= end <= start <= 1, got {} -> {}",
                self.epsilon_start, self.epsilon_end
            ));
        }
        for (name, v) in [
            ("buffer_capacity", self.buffer_capacity as u64),
            ("batch_size", self.batch_size as u64),
            ("c_target", self.c_target),
            ("c_current", self.c_current),
        ] {
            if v == 0 {
                return fail(format!("{name} must be >= 1"));
            }
        }
        if self.hidden.contains(&0) {
            return fail("hidden layer sizes must be positive".into());
        }
        Ok(())
    }

    pub fn epsilon_schedule(&self) -> EpsilonSchedule {
        EpsilonSchedule {
            start: self.epsilon_start,
            end: self.epsilon_end,
            decay_steps: self.epsilon_decay_steps,
        }
    }

    pub fn lambda_schedule(&self) -> LambdaSchedule {
        LambdaSchedule {
            start: self.lambda_start,
            end: self.lambda_end,
            horizon: self.total_steps,
        }
    }

    pub fn layer_sizes(&self, state_dim: usize, n_actions: usize) -> Vec<usize> {
        let mut sizes = Vec::with_capacity(self.hidden.len() + 2);
        sizes.push(state_dim);
        sizes.extend_from_slice(&self.hidden);
        sizes.push(n_actions);
        sizes
    }

    /// Tuned settings for `task`, shared defaults plus the per-agent rows.
    ///
    /// MeDQN(R) was never tuned on the low-dimensional tasks; its preset reuses the
    /// MeDQN(U) row with a buffer one tenth the size of DQN's.
    pub fn preset(task: Task, kind: AgentKind) -> Self {
        let base = AgentConfig {
            gamma: 0.99,
            lr: 1e-3,
            optimizer: OptimizerKind::adam(),
            hidden: vec![32, 32],
            buffer_capacity: 10_000,
            batch_size: 32,
            c_target: 100,
            c_current: 1,
            epochs: 1,
            lambda_start: 0.0,
            lambda_end: 0.0,
            epsilon_start: 1.0,
            epsilon_end: 0.01,
            epsilon_decay_steps: 1_000,
            total_steps: 100_000,
            warmup_steps: 1_000,
            loss_reduction: LossReduction::Mean,
        };
        let row = |lr, buffer_capacity, epochs, lambda: (f64, f64), c_current| AgentConfig {
            lr,
            buffer_capacity,
            epochs,
            lambda_start: lambda.0,
            lambda_end: lambda.1,
            c_current,
            ..base.clone()
        };
        match (task, kind) {
            (Task::MountainCar, AgentKind::Dqn) => row(1e-2, 10_000, 1, (0.0, 0.0), 8),
            (Task::MountainCar, AgentKind::DqnS) => row(1e-3, 32, 1, (0.0, 0.0), 1),
            (Task::MountainCar, AgentKind::MedqnU) => row(1e-3, 32, 4, (0.01, 4.0), 1),
            (Task::MountainCar, AgentKind::MedqnR) => row(1e-3, 1_000, 4, (0.01, 4.0), 1),
            (Task::Acrobot, AgentKind::Dqn) => row(1e-3, 10_000, 1, (0.0, 0.0), 1),
            (Task::Acrobot, AgentKind::DqnS) => row(3e-4, 32, 1, (0.0, 0.0), 1),
            (Task::Acrobot, AgentKind::MedqnU) => row(3e-4, 32, 1, (0.01, 2.0), 1),
            (Task::Acrobot, AgentKind::MedqnR) => row(3e-4, 1_000, 1, (0.01, 2.0), 1),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        for task in [Task::MountainCar, Task::Acrobot] {
            for kind in AgentKind::ALL {
                AgentConfig::preset(task, kind).validate().unwrap();
            }
        }
    }

    #[test]
    fn mountain_car_rows() {
        let u = AgentConfig::preset(Task::MountainCar, AgentKind::MedqnU);
        assert_eq!((u.lr, u.buffer_capacity, u.epochs, u.lambda_end, u.c_target, u.c_current), (1e-3, 32, 4, 4.0, 100, 1));
        assert_eq!(u.lambda_start, 0.01);
        let d = AgentConfig::preset(Task::MountainCar, AgentKind::Dqn);
        assert_eq!((d.lr, d.buffer_capacity, d.c_current), (1e-2, 10_000, 8));
    }

    #[test]
    fn acrobot_rows() {
        let u = AgentConfig::preset(Task::Acrobot, AgentKind::MedqnU);
        assert_eq!((u.lr, u.buffer_capacity, u.epochs, u.lambda_end), (3e-4, 32, 1, 2.0));
        let s = AgentConfig::preset(Task::Acrobot, AgentKind::DqnS);
        assert_eq!((s.lr, s.buffer_capacity), (3e-4, 32));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let good = AgentConfig::preset(Task::MountainCar, AgentKind::MedqnU);
        let cases: Vec<fn(&mut AgentConfig)> = vec![
            |c| c.gamma = 1.0,
            |c| c.epochs = 0,
            |c| c.lambda_start = 5.0,
            |c| c.c_target = 0,
            |c| c.batch_size = 0,
            |c| c.lr = f64::NAN,
        ];
        for mutate in cases {
            let mut c = good.clone();
            mutate(&mut c);
            assert!(c.validate().is_err(), "{c:?}");
        }
    }

    #[test]
    fn agent_names_round_trip() {
        for k in AgentKind::ALL {
            assert_eq!(k.name().parse::<AgentKind>().unwrap(), k);
        }
        assert_eq!("MeDQN(U)".parse::<AgentKind>().unwrap(), AgentKind::MedqnU);
        assert_eq!("DQN(S)".parse::<AgentKind>().unwrap(), AgentKind::DqnS);
    }
}
