//! Planners and learning agents.

mod agents;
mod hql;
mod planning;
mod store;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use agents::{monte_carlo_agent, n_step_q_agent, q_lambda_agent, sarsa_lambda_agent, AgentParams};
pub use hql::{highway_q_learning, HqlParams};
pub use planning::{
    highway_value_iteration, policy_iteration, value_iteration, HviParams, PlanningLogEntry, PlanningReport,
};
pub use store::{Episode, SuffixRef, TrajectoryStore};

use crate::envs::{EnvError, EpisodicEnv};
use crate::mdp::{greedy_policy, v_pi_oracle, MdpError, QTable};

#[derive(Debug, Error)]
pub enum AlgorithmError {
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error("no convergence after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// When a learning run counts as solved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveCriterion {
    /// Optimal expected return from the start state.
    pub optimal: f64,
    pub tolerance: f64,
    /// Consecutive optimal evaluations required.
    pub streak: usize,
}

impl SolveCriterion {
    pub fn new(optimal: f64) -> Self {
        Self { optimal, tolerance: 1e-9, streak: 10 }
    }

    pub fn is_optimal(&self, value: f64) -> bool {
        (value - self.optimal).abs() <= self.tolerance
    }
}

/// Per-episode record of a learning run.
///
/// `evaluations[i]` is the exact expected return of the greedy policy after
/// `i` training episodes; entry 0 is before any training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearningLog {
    pub algorithm: String,
    pub evaluations: Vec<f64>,
    /// Sampled undiscounted return of each training episode.
    pub returns: Vec<f64>,
    pub criterion: SolveCriterion,
    /// Training budget in episodes.
    pub budget: usize,
    /// `(episodes, Q)` snapshots, including the final table.
    pub snapshots: Vec<(usize, QTable)>,
}

impl LearningLog {
    pub fn episodes(&self) -> usize {
        self.returns.len()
    }

    pub fn final_q(&self) -> Option<&QTable> {
        self.snapshots.last().map(|(_, q)| q)
    }

    pub fn solved(&self) -> Solve {
        episodes_to_solve(self, &self.criterion)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum Solve {
    Solved { episodes: usize },
    NotSolved { budget: usize },
}

impl Solve {
    pub fn episodes(self) -> Option<usize> {
        match self {
            Solve::Solved { episodes } => Some(episodes),
            Solve::NotSolved { .. } => None,
        }
    }
}

/// First episode count from which `criterion.streak` consecutive greedy
/// evaluations are optimal.
pub fn episodes_to_solve(log: &LearningLog, criterion: &SolveCriterion) -> Solve {
    let streak = criterion.streak.max(1);
    let mut run = 0;
    for (i, &v) in log.evaluations.iter().enumerate() {
        if criterion.is_optimal(v) {
            run += 1;
            if run == streak {
                return Solve::Solved { episodes: i + 1 - streak };
            }
        } else {
            run = 0;
        }
    }
    Solve::NotSolved { budget: log.budget }
}

/// Exact expected return of the greedy policy of `q` from the start state.
pub fn greedy_value<E: EpisodicEnv + ?Sized>(env: &E, q: &QTable) -> Result<f64, AlgorithmError> {
    let pi = greedy_policy(q);
    let v = v_pi_oracle(env.model(), &pi, 1e-13)?;
    Ok(v.get(env.start_state()))
}

/// Optimal expected return from the start state.
pub fn optimal_value<E: EpisodicEnv + ?Sized>(env: &E) -> Result<f64, AlgorithmError> {
    let q = crate::mdp::q_star_oracle(env.model(), 1e-13)?;
    Ok(q.max_row(env.start_state()))
}

/// ε-greedy action with uniform tie-breaking among maximizers.
pub(crate) fn explore<R: Rng + ?Sized>(rng: &mut R, row: &[f64], epsilon: f64) -> usize {
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return rng.gen_range(0..row.len());
    }
    greedy_tie_break(rng, row)
}

pub(crate) fn greedy_tie_break<R: Rng + ?Sized>(rng: &mut R, row: &[f64]) -> usize {
    let best = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let ties = row.iter().filter(|&&v| v == best).count();
    if ties == 1 {
        return row.iter().position(|&v| v == best).expect("max exists");
    }
    let pick = rng.gen_range(0..ties);
    row.iter().enumerate().filter(|(_, &v)| v == best).nth(pick).map(|(i, _)| i).expect("pick < ties")
}

/// Shared bookkeeping for episodic learners.
pub(crate) struct Recorder {
    log: LearningLog,
    snapshot_every: usize,
    stop_when_solved: bool,
    run: usize,
}

impl Recorder {
    pub(crate) fn new<E: EpisodicEnv + ?Sized>(
        algorithm: &str,
        env: &E,
        budget: usize,
        snapshot_every: usize,
        stop_when_solved: bool,
    ) -> Result<Self, AlgorithmError> {
        let criterion = SolveCriterion::new(optimal_value(env)?);
        Ok(Self {
            log: LearningLog {
                algorithm: algorithm.to_string(),
                evaluations: Vec::new(),
                returns: Vec::new(),
                criterion,
                budget,
                snapshots: Vec::new(),
            },
            snapshot_every,
            stop_when_solved,
            run: 0,
        })
    }

    /// Records the greedy evaluation of `q`; returns `true` once the run
    /// should stop early.
    pub(crate) fn evaluate<E: EpisodicEnv + ?Sized>(&mut self, env: &E, q: &QTable) -> Result<bool, AlgorithmError> {
        let v = greedy_value(env, q)?;
        self.log.evaluations.push(v);
        if self.log.criterion.is_optimal(v) {
            self.run += 1;
        } else {
            self.run = 0;
        }
        Ok(self.stop_when_solved && self.run >= self.log.criterion.streak)
    }

    pub(crate) fn episode(&mut self, ret: f64, q: &QTable) {
        self.log.returns.push(ret);
        let n = self.log.returns.len();
        if self.snapshot_every > 0 && n % self.snapshot_every == 0 {
            self.log.snapshots.push((n, q.clone()));
        }
    }

    pub(crate) fn finish(mut self, q: QTable) -> LearningLog {
        let n = self.log.returns.len();
        if self.log.snapshots.last().map(|(k, _)| *k) != Some(n) {
            self.log.snapshots.push((n, q));
        }
        self.log
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log(evals: Vec<f64>) -> LearningLog {
        LearningLog {
            algorithm: "test".into(),
            returns: vec![0.0; evals.len().saturating_sub(1)],
            evaluations: evals,
            criterion: SolveCriterion { optimal: 1.0, tolerance: 1e-9, streak: 3 },
            budget: 9,
            snapshots: Vec::new(),
        }
    }

    #[test]
    fn solve_examples() {
        let l = log(vec![1.0; 5]);
        assert_eq!(l.solved(), Solve::Solved { episodes: 0 });
        let l = log(vec![0.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0]);
        assert_eq!(l.solved(), Solve::Solved { episodes: 4 });
        let l = log(vec![0.0, 1.0, 1.0]);
        assert_eq!(l.solved(), Solve::NotSolved { budget: 9 });
    }

    #[test]
    fn tie_break_is_uniform_over_maximizers() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut counts = [0usize; 3];
        for _ in 0..3000 {
            counts[greedy_tie_break(&mut rng, &[1.0, 0.0, 1.0])] += 1;
        }
        assert_eq!(counts[1], 0);
        assert!(counts[0] > 1300 && counts[2] > 1300);
    }
}
