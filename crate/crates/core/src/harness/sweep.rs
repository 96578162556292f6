use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::agents::AgentKind;
use crate::envs::Task;
use crate::error::{Error, Result};
use crate::par;

use super::config::{Overrides, RunConfig};
use super::stats::Summary;
use super::train::{run_training, RunOutcome};

pub const SUMMARY_FILE: &str = "summary.csv";

/// Cross product of agents, buffer sizes and seeds on one task.
#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub task: Task,
    pub agents: Vec<AgentKind>,
    /// `None` keeps each agent's preset buffer size.
    pub buffer_sizes: Vec<Option<usize>>,
    pub seeds: Vec<u64>,
    pub overrides: Overrides,
    pub log_every: u64,
    pub probe: bool,
    pub out_dir: PathBuf,
}

impl SweepConfig {
    /// Resolved run configurations, grouped by cell, seeds innermost.
    pub fn runs(&self) -> Result<Vec<RunConfig>> {
        if self.agents.is_empty() || self.buffer_sizes.is_empty() || self.seeds.is_empty() {
            return Err(Error::Config("sweep needs at least one agent, buffer size and seed".into()));
        }
        let mut runs = Vec::new();
        for &agent in &self.agents {
            for &buffer in &self.buffer_sizes {
                let overrides = self.overrides.merged_with(&Overrides {
                    buffer_size: buffer,
                    ..Default::default()
                });
                for &seed in &self.seeds {
                    let mut cfg = RunConfig::from_preset(self.task, agent, seed, &overrides)?;
                    cfg.log_every = self.log_every;
                    cfg.probe = self.probe;
                    cfg.out_dir = self.out_dir.clone();
                    cfg.validate()?;
                    runs.push(cfg);
                }
            }
        }
        Ok(runs)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub task: String,
    pub agent: String,
    pub buffer_size: usize,
    pub runs: usize,
    pub failed: usize,
    pub mean_final_return: f64,
    pub two_se: f64,
    /// Set when only one seed finished, so `two_se` carries no information.
    pub single_seed: bool,
    pub errors: String,
}

/// Final `avg_return` statistics for each cell of `runs` (consecutive entries sharing a label).
pub fn summarize(runs: &[RunConfig], results: &[Result<RunOutcome>]) -> Vec<SummaryRow> {
    let mut rows: Vec<SummaryRow> = Vec::new();
    let mut i = 0;
    while i < runs.len() {
        let label = runs[i].label();
        let mut j = i;
        while j < runs.len() && runs[j].label() == label {
            j += 1;
        }
        let mut finals = Vec::new();
        let mut errors = Vec::new();
        for (cfg, res) in runs[i..j].iter().zip(&results[i..j]) {
            match res {
                Ok(out) => finals.push(out.final_avg_return()),
                Err(e) => errors.push(format!("seed {}: {e}", cfg.seed)),
            }
        }
        let s = Summary::of(&finals);
        rows.push(SummaryRow {
            task: runs[i].task.to_string(),
            agent: runs[i].agent.to_string(),
            buffer_size: runs[i].agent_config.buffer_capacity,
            runs: j - i,
            failed: errors.len(),
            mean_final_return: s.mean,
            two_se: s.two_se(),
            single_seed: s.n == 1,
            errors: errors.join("; "),
        });
        i = j;
    }
    rows
}

/// Runs every configuration of the sweep, writing one metrics file per run and a summary
/// table. A failed run is recorded in the summary and does not stop the others.
pub fn run_sweep(sweep: &SweepConfig) -> Result<(PathBuf, Vec<SummaryRow>)> {
    let runs = sweep.runs()?;
    std::fs::create_dir_all(&sweep.out_dir).map_err(|e| Error::io(&sweep.out_dir, e))?;
    let results = par::map(&runs, |cfg| run_training(cfg).map(|(_, out)| out));
    let rows = summarize(&runs, &results);
    let path = sweep.out_dir.join(SUMMARY_FILE);
    write_summary(&path, &rows)?;
    Ok((path, rows))
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Config(format!("{}: {other:?}", path.display())),
    })?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}
