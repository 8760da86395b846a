//! Experiment configs, seeded batch execution and CSV output.
//!
//! A config expands into isolated cells (one per operator run, planner
//! problem, agent seed, ...). Cells run on a rayon pool and their rows are
//! merged by sort key, so output never depends on scheduling.

pub mod acceptance;
mod config;
mod experiments;
mod presets;
mod properties;
mod report;
mod rows;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use thiserror::Error;

pub use config::{
    AgentName, AgentSpec, EnvSpec, ExperimentConfig, ExperimentKind, OperatorName, OperatorSpec, PlannerSpec,
    PolicySetChoice, PropertySuite, RetraceSpec, ToyTask,
};
pub use presets::{preset, preset_names};
pub use properties::{IS_TOL, SLACK, SOFTMAX_HARD_TEMPERATURE, SOFTMAX_HARD_TOL, SOFTMAX_TEMPERATURES};
pub use report::{quantile, report, summarize, summary_csv, SummaryRow, SUMMARY_HEADER};
pub use rows::{format_real, read_rows, rows_to_string, write_rows, Metric, ResultRow, HEADER};

use crate::algorithms::AlgorithmError;
use crate::envs::EnvError;
use crate::mdp::MdpError;
use crate::operators::OperatorError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {message}")]
    Validation { path: String, message: String },
    #[error("schema mismatch: {0}")]
    Schema(String),
    #[error("{path}: {err}", path = .0.display(), err = .1)]
    Io(PathBuf, std::io::Error),
    #[error("csv: {0}")]
    Csv(String),
    #[error("{} cell(s) failed: {}", .0.len(), .0.join("; "))]
    Cells(Vec<String>),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Algorithm(#[from] AlgorithmError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

impl From<csv::Error> for HarnessError {
    fn from(e: csv::Error) -> Self {
        HarnessError::Csv(e.to_string())
    }
}

impl HarnessError {
    /// Errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            HarnessError::Validation { .. } | HarnessError::Schema(_) | HarnessError::Csv(_) | HarnessError::Io(..)
        )
    }
}

/// Rows of a run plus the cells that failed.
#[derive(Debug, Default)]
pub struct RunOutput {
    pub rows: Vec<ResultRow>,
    pub failures: Vec<String>,
}

impl RunOutput {
    pub fn into_result(self) -> Result<Vec<ResultRow>, HarnessError> {
        if self.failures.is_empty() {
            Ok(self.rows)
        } else {
            Err(HarnessError::Cells(self.failures))
        }
    }
}

/// Runs every cell of `config` in parallel; rows come back sorted.
pub fn run(config: &ExperimentConfig) -> Result<RunOutput, HarnessError> {
    config.validate()?;
    let cells = experiments::cells(config)?;
    let results: Vec<(String, Result<Vec<ResultRow>, HarnessError>)> =
        cells.par_iter().map(|c| (c.key.clone(), (c.run)())).collect();
    let mut out = RunOutput::default();
    for (key, res) in results {
        match res {
            Ok(rows) => out.rows.extend(rows),
            Err(e) => out.failures.push(format!("{}[{key}]: {e}", config.id)),
        }
    }
    out.rows.sort_by(ResultRow::cmp_key);
    out.failures.sort();
    Ok(out)
}

/// Runs `config` and writes its CSV to `path` (or the config's output).
/// Rows of successful cells are written even when other cells fail.
pub fn execute(config: &ExperimentConfig, path: Option<&Path>) -> Result<Vec<ResultRow>, HarnessError> {
    let out = run(config)?;
    if let Some(p) = path.or(config.output.as_deref()) {
        write_csv(p, &out.rows)?;
    }
    out.into_result()
}

pub fn write_csv(path: &Path, rows: &[ResultRow]) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.to_path_buf(), e))?;
    }
    let file = std::fs::File::create(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
    write_rows(std::io::BufWriter::new(file), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reruns_are_byte_identical() {
        let cfg = preset("fig_toy_tasks").unwrap();
        let cfg = ExperimentConfig {
            env: Some(EnvSpec::Toy { tasks: vec![ToyTask::TraceBack], delays: vec![4] }),
            seeds: vec![0, 1, 2],
            ..cfg
        };
        let a = rows_to_string(&run(&cfg).unwrap().into_result().unwrap());
        let b = rows_to_string(&run(&cfg).unwrap().into_result().unwrap());
        assert_eq!(a, b);
        assert!(a.lines().count() > 3);
    }

    #[test]
    fn failed_cells_keep_partial_rows() {
        let cfg = ExperimentConfig::from_json(
            r#"{"id":"mixed","kind":"toy_tasks","env":{"name":"toy","tasks":["trace_back"],"delays":[3]},
                "agents":{"names":["q_lambda","highway_q_learning"],"classical":{"alpha":2.0,"lambda":0.9,
                "epsilon":0.2,"n":5,"mc_rate":0.1,"max_episodes":50,"snapshot_every":0,"stop_when_solved":true}},
                "seeds":[0]}"#,
        )
        .unwrap();
        let out = run(&cfg).unwrap();
        assert_eq!(out.failures.len(), 1);
        assert_eq!(out.rows.len(), 1);
        assert_eq!(out.rows[0].algorithm, "highway_q_learning");
        assert!(matches!(out.into_result(), Err(HarnessError::Cells(_))));
    }
}
