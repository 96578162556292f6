use std::collections::VecDeque;
use std::path::PathBuf;

use crate::agents::{AgentKind, LearnStats, QAgent};
use crate::diagnostics::{probe_greedy, ProbeRecord, PROBE_EVERY, PROBE_STATE};
use crate::error::{Error, Result};
use crate::replay::Transition;

use super::config::RunConfig;
use super::metrics::{metrics_writer, MetricsRow};
use super::rng_for;

/// Completed episodes averaged into `avg_return`.
pub const RETURN_WINDOW: usize = 20;

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub rows: Vec<MetricsRow>,
    pub probes: Vec<ProbeRecord>,
    pub episode_returns: Vec<f64>,
    pub agent: QAgent,
}

impl RunOutcome {
    /// `avg_return` of the last logged row, or NaN when nothing was logged.
    pub fn final_avg_return(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.avg_return_last_20)
    }
}

/// Runs one training loop, handing every logged row to `sink` as it is produced.
pub fn execute(cfg: &RunConfig, mut sink: impl FnMut(&MetricsRow) -> Result<()>) -> Result<RunOutcome> {
    cfg.validate()?;
    let task = cfg.task;
    let mut rng = rng_for(cfg.seed, 0);
    let mut env = task.make();
    let mut agent = QAgent::new(
        cfg.agent,
        cfg.agent_config.clone(),
        task.state_dim(),
        task.n_actions(),
        &mut rng,
    )?;
    let track_bounds = cfg.agent == AgentKind::MedqnU;

    let mut rows = Vec::new();
    let mut probes = Vec::new();
    let mut episode_returns = Vec::new();
    let mut recent: VecDeque<f64> = VecDeque::with_capacity(RETURN_WINDOW);
    let mut running_return = 0.0;
    let mut last = LearnStats::default();
    let mut probe_action = None;

    let mut s = env.reset(&mut rng);
    for t in 1..=cfg.total_steps() {
        if track_bounds {
            agent.observe_state(&s)?;
        }
        let a = agent.act(&s, t - 1, &mut rng)?;
        let out = env.step(a)?;
        running_return += out.reward;
        agent.store(Transition {
            s: std::mem::take(&mut s),
            a,
            r: out.reward,
            s_next: out.next_obs.clone(),
            terminal: out.terminal,
            truncated: out.truncated,
        })?;
        if out.terminal || out.truncated {
            episode_returns.push(running_return);
            if recent.len() == RETURN_WINDOW {
                recent.pop_front();
            }
            recent.push_back(running_return);
            running_return = 0.0;
            s = env.reset(&mut rng);
        } else {
            s = out.next_obs;
        }

        if agent.should_learn(t) {
            if let Some(stats) = agent.learn_step(t, &mut rng)? {
                last = stats;
            }
        }
        if agent.should_sync(t) {
            agent.sync_target();
        }
        if cfg.probe && t % PROBE_EVERY == 0 {
            let greedy_action = probe_greedy(agent.q_params(), &PROBE_STATE)?;
            probes.push(ProbeRecord { step: t, greedy_action });
            probe_action = Some(greedy_action);
        }
        if t % cfg.log_every == 0 {
            let avg = if recent.is_empty() {
                running_return
            } else {
                recent.iter().sum::<f64>() / recent.len() as f64
            };
            let row = MetricsRow {
                step: t,
                episodes_completed: episode_returns.len() as u64,
                avg_return_last_20: avg,
                epsilon: agent.epsilon_at(t),
                lambda: agent.lambda_at(t),
                loss_dqn: last.loss_dqn,
                loss_consolid: last.loss_consolid,
                probe_action: if cfg.probe { probe_action } else { None },
                buffer_bytes: agent.buffer().bytes() as u64,
            };
            sink(&row)?;
            rows.push(row);
        }
    }
    Ok(RunOutcome {
        rows,
        probes,
        episode_returns,
        agent,
    })
}

/// Runs without touching the filesystem.
pub fn run_in_memory(cfg: &RunConfig) -> Result<RunOutcome> {
    execute(cfg, |_| Ok(()))
}

/// Runs and streams the metrics CSV to `cfg.metrics_path()`. On a numeric failure the rows
/// logged so far stay on disk and the error is returned.
pub fn run_training(cfg: &RunConfig) -> Result<(PathBuf, RunOutcome)> {
    cfg.validate()?;
    let path = cfg.metrics_path();
    let mut writer = metrics_writer(&path)?;
    let result = execute(cfg, |row| {
        writer.serialize(row)?;
        Ok(())
    });
    writer.flush().map_err(|e| Error::io(&path, e))?;
    result.map(|outcome| (path, outcome))
}
