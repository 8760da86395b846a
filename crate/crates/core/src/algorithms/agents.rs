//! Classical tabular learners used as baselines.
//!
//! All start from `Q = 0`, act ε-greedily with uniform tie-breaking and log
//! one greedy evaluation per episode.

use serde::{Deserialize, Serialize};

use super::hql::collect;
use super::{explore, AlgorithmError, LearningLog, Recorder};
use crate::envs::EpisodicEnv;
use crate::mdp::QTable;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentParams {
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
    /// Lookahead of the `n`-step agent.
    pub n: usize,
    /// Moving-average coefficient of the Monte Carlo agent.
    pub mc_rate: f64,
    pub max_episodes: usize,
    pub snapshot_every: usize,
    pub stop_when_solved: bool,
}

impl Default for AgentParams {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            lambda: 0.9,
            epsilon: 0.2,
            n: 5,
            mc_rate: 0.1,
            max_episodes: 2000,
            snapshot_every: 0,
            stop_when_solved: true,
        }
    }
}

impl AgentParams {
    fn validate(&self) -> Result<(), AlgorithmError> {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !(unit(self.alpha) && unit(self.lambda) && unit(self.epsilon) && unit(self.mc_rate)) {
            return Err(AlgorithmError::Params("alpha, lambda, epsilon and mc_rate must lie in [0, 1]".into()));
        }
        if self.n == 0 || self.max_episodes == 0 {
            return Err(AlgorithmError::Params("n and max_episodes must be positive".into()));
        }
        Ok(())
    }
}

/// Sparse replacing eligibility traces.
struct Traces {
    e: Vec<f64>,
    active: Vec<usize>,
}

impl Traces {
    fn new(len: usize) -> Self {
        Self { e: vec![0.0; len], active: Vec::new() }
    }

    fn set_one(&mut self, i: usize) {
        if self.e[i] == 0.0 {
            self.active.push(i);
        }
        self.e[i] = 1.0;
    }

    fn apply(&mut self, q: &mut [f64], step: f64) {
        for &i in &self.active {
            q[i] += step * self.e[i];
        }
    }

    fn decay(&mut self, factor: f64) {
        if factor == 0.0 {
            self.clear();
            return;
        }
        for &i in &self.active {
            self.e[i] *= factor;
        }
    }

    fn clear(&mut self) {
        for &i in &self.active {
            self.e[i] = 0.0;
        }
        self.active.clear();
    }
}

fn setup<E: EpisodicEnv + ?Sized>(
    name: &str,
    env: &mut E,
    params: &AgentParams,
    seed: u64,
) -> Result<(Recorder, rand_chacha::ChaCha8Rng, QTable), AlgorithmError> {
    params.validate()?;
    env.seed(seed::derive_seed(seed, "env"));
    let rng = seed::stream(seed, "agent");
    let q = QTable::zeros(env.num_states(), env.num_actions());
    let rec = Recorder::new(name, env, params.max_episodes, params.snapshot_every, params.stop_when_solved)?;
    Ok((rec, rng, q))
}

/// Shared online loop for the trace-based learners. `watkins` selects
/// Q(λ) (max bootstrap, traces cut after exploratory actions) over SARSA(λ).
fn trace_agent<E: EpisodicEnv + ?Sized>(
    name: &str,
    watkins: bool,
    env: &mut E,
    params: &AgentParams,
    seed: u64,
) -> Result<LearningLog, AlgorithmError> {
    let (mut rec, mut rng, mut q) = setup(name, env, params, seed)?;
    let gamma = env.model().discount();
    let na = env.num_actions();
    let mut traces = Traces::new(q.values().len());
    let mut stop = rec.evaluate(env, &q)?;
    let mut episodes = 0;
    while !stop && episodes < params.max_episodes {
        traces.clear();
        let mut s = env.reset();
        let mut a = explore(&mut rng, q.row(s), params.epsilon);
        let mut ret = 0.0;
        loop {
            let st = env.step(a)?;
            ret += st.reward;
            let terminal = env.model().is_terminal(st.state);
            let next_a = if st.done { 0 } else { explore(&mut rng, q.row(st.state), params.epsilon) };
            let bootstrap = if terminal {
                0.0
            } else if watkins || st.done {
                q.max_row(st.state)
            } else {
                q.get(st.state, next_a)
            };
            let delta = st.reward + gamma * bootstrap - q.get(s, a);
            traces.set_one(s * na + a);
            traces.apply(q.values_mut(), params.alpha * delta);
            if st.done {
                break;
            }
            let keep = if watkins {
                let best = q.max_row(st.state);
                q.get(st.state, next_a) == best
            } else {
                true
            };
            traces.decay(if keep { gamma * params.lambda } else { 0.0 });
            s = st.state;
            a = next_a;
        }
        episodes += 1;
        rec.episode(ret, &q);
        stop = rec.evaluate(env, &q)?;
    }
    Ok(rec.finish(q))
}

/// Watkins Q(λ) with replacing traces.
pub fn q_lambda_agent<E: EpisodicEnv + ?Sized>(
    env: &mut E,
    params: &AgentParams,
    seed: u64,
) -> Result<LearningLog, AlgorithmError> {
    trace_agent("q_lambda", true, env, params, seed)
}

/// SARSA(λ) with replacing traces.
pub fn sarsa_lambda_agent<E: EpisodicEnv + ?Sized>(
    env: &mut E,
    params: &AgentParams,
    seed: u64,
) -> Result<LearningLog, AlgorithmError> {
    trace_agent("sarsa_lambda", false, env, params, seed)
}

/// Every-visit Monte Carlo: `Q(s_t, a_t)` tracks an exponential moving
/// average of the discounted return from `t`.
pub fn monte_carlo_agent<E: EpisodicEnv + ?Sized>(
    env: &mut E,
    params: &AgentParams,
    seed: u64,
) -> Result<LearningLog, AlgorithmError> {
    let (mut rec, mut rng, mut q) = setup("monte_carlo", env, params, seed)?;
    let gamma = env.model().discount();
    let mut stop = rec.evaluate(env, &q)?;
    let mut episodes = 0;
    while !stop && episodes < params.max_episodes {
        let snapshot = q.clone();
        let ep = collect(env, 0, |s| explore(&mut rng, snapshot.row(s), params.epsilon))?;
        let mut g = 0.0;
        for t in (0..ep.len()).rev() {
            g = ep.rewards[t] + gamma * g;
            let (s, a) = (ep.states[t], ep.actions[t]);
            let old = q.get(s, a);
            q.set(s, a, old + params.mc_rate * (g - old));
        }
        episodes += 1;
        rec.episode(ep.rewards.iter().sum(), &q);
        stop = rec.evaluate(env, &q)?;
    }
    Ok(rec.finish(q))
}

/// `n`-step Q-learning without off-policy correction:
/// target `Σ_{i<n} γ^i r_{t+i} + γ^n max_a Q(s_{t+n}, a)`.
pub fn n_step_q_agent<E: EpisodicEnv + ?Sized>(
    env: &mut E,
    params: &AgentParams,
    seed: u64,
) -> Result<LearningLog, AlgorithmError> {
    let (mut rec, mut rng, mut q) = setup("n_step_q", env, params, seed)?;
    let gamma = env.model().discount();
    let n = params.n;
    let mut stop = rec.evaluate(env, &q)?;
    let mut episodes = 0;
    while !stop && episodes < params.max_episodes {
        let mut states = vec![env.reset()];
        let mut actions = Vec::new();
        let mut rewards = Vec::new();
        let end_terminal;
        let update =
            |q: &mut QTable, tau: usize, states: &[usize], actions: &[usize], rewards: &[f64], end: Option<bool>| {
                let horizon = rewards.len();
                let last = (tau + n).min(horizon);
                let mut g = 0.0;
                let mut disc = 1.0;
                for r in &rewards[tau..last] {
                    g += disc * r;
                    disc *= gamma;
                }
                let boot_state = states[last];
                let terminal_end = last == horizon && end == Some(true);
                if !terminal_end {
                    g += disc * q.max_row(boot_state);
                }
                let (s, a) = (states[tau], actions[tau]);
                let old = q.get(s, a);
                q.set(s, a, old + params.alpha * (g - old));
            };
        loop {
            let s = *states.last().expect("nonempty");
            let a = explore(&mut rng, q.row(s), params.epsilon);
            let st = env.step(a)?;
            actions.push(a);
            rewards.push(st.reward);
            states.push(st.state);
            if st.done {
                end_terminal = env.model().is_terminal(st.state);
                break;
            }
            if rewards.len() >= n {
                let tau = rewards.len() - n;
                update(&mut q, tau, &states, &actions, &rewards, None);
            }
        }
        for tau in rewards.len().saturating_sub(n)..rewards.len() {
            update(&mut q, tau, &states, &actions, &rewards, Some(end_terminal));
        }
        episodes += 1;
        rec.episode(rewards.iter().sum(), &q);
        stop = rec.evaluate(env, &q)?;
    }
    Ok(rec.finish(q))
}
