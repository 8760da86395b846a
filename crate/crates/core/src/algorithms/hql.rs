use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::store::{Episode, TrajectoryStore};
use super::{explore, AlgorithmError, LearningLog, Recorder};
use crate::envs::EpisodicEnv;
use crate::mdp::QTable;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HqlParams {
    /// Largest lookahead depth; `None` looks ahead to the end of each suffix.
    pub max_depth: Option<usize>,
    /// Behavior policies sampled per update.
    pub policies_per_update: usize,
    /// Episodes collected with each behavior policy.
    pub rollout_episodes: usize,
    /// Updates after each rollout phase; `None` uses the last episode length.
    pub update_epochs: Option<usize>,
    pub epsilon: f64,
    /// Training budget in episodes.
    pub max_episodes: usize,
    pub snapshot_every: usize,
    pub stop_when_solved: bool,
}

impl Default for HqlParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            policies_per_update: 3,
            rollout_episodes: 1,
            update_epochs: None,
            epsilon: 0.2,
            max_episodes: 2000,
            snapshot_every: 0,
            stop_when_solved: true,
        }
    }
}

impl HqlParams {
    fn validate(&self) -> Result<(), AlgorithmError> {
        if self.max_depth == Some(0)
            || self.policies_per_update == 0
            || self.rollout_episodes == 0
            || self.update_epochs == Some(0)
            || self.max_episodes == 0
        {
            return Err(AlgorithmError::Params("all counts must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(AlgorithmError::Params(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        Ok(())
    }
}

/// Rolls out one episode, choosing actions with `act`.
pub(crate) fn collect<E: EpisodicEnv + ?Sized>(
    env: &mut E,
    policy: usize,
    mut act: impl FnMut(usize) -> usize,
) -> Result<Episode, AlgorithmError> {
    let mut s = env.reset();
    let mut ep = Episode {
        policy,
        states: Vec::new(),
        actions: Vec::new(),
        rewards: Vec::new(),
        final_state: s,
        terminal: env.model().is_terminal(s),
    };
    if ep.terminal {
        return Ok(ep);
    }
    loop {
        let a = act(s);
        let st = env.step(a)?;
        ep.states.push(s);
        ep.actions.push(a);
        ep.rewards.push(st.reward);
        s = st.state;
        if st.done {
            ep.final_state = s;
            ep.terminal = env.model().is_terminal(s);
            return Ok(ep);
        }
    }
}

/// Highway Q-learning on a tabular episodic environment.
///
/// Each round sets an ε-greedy behavior policy from the current table,
/// stores its episodes as per-policy suffix datasets, then performs
/// assignment updates on `(s, a)` pairs drawn from the visit buffer:
/// the max over up to `M` sampled policies and over depths `n` of the gated
/// empirical return `max(Ê G_1, Ê G_n)`, bootstrapping with `max_a Q`.
///
/// The environment stream is seeded from `seed` and reset by this call.
pub fn highway_q_learning<E: EpisodicEnv + ?Sized>(
    env: &mut E,
    params: &HqlParams,
    seed: u64,
) -> Result<LearningLog, AlgorithmError> {
    params.validate()?;
    env.seed(seed::derive_seed(seed, "env"));
    let mut rng = seed::stream(seed, "agent");
    let (ns, na) = (env.num_states(), env.num_actions());
    let gamma = env.model().discount();
    let mut q = QTable::zeros(ns, na);
    let mut store = TrajectoryStore::new();
    let mut rec =
        Recorder::new("highway_q_learning", env, params.max_episodes, params.snapshot_every, params.stop_when_solved)?;
    let mut stop = rec.evaluate(env, &q)?;
    let mut episodes = 0;
    let mut policy = 0;
    while !stop && episodes < params.max_episodes {
        let mut last_len = 1;
        for j in 0..params.rollout_episodes {
            if episodes >= params.max_episodes {
                break;
            }
            let snapshot = q.clone();
            let ep = collect(env, policy, |s| explore(&mut rng, snapshot.row(s), params.epsilon))?;
            last_len = ep.len().max(1);
            let ret = ep.rewards.iter().sum();
            store.push(ep);
            episodes += 1;
            rec.episode(ret, &q);
            if j + 1 < params.rollout_episodes && episodes < params.max_episodes {
                stop = rec.evaluate(env, &q)?;
                if stop {
                    break;
                }
            }
        }
        if stop {
            break;
        }
        let updates = params.update_epochs.unwrap_or(last_len);
        for _ in 0..updates {
            update_once(&mut q, &store, params, gamma, &mut rng);
        }
        stop = rec.evaluate(env, &q)?;
        policy += 1;
    }
    Ok(rec.finish(q))
}

fn update_once<R: Rng + ?Sized>(q: &mut QTable, store: &TrajectoryStore, params: &HqlParams, gamma: f64, rng: &mut R) {
    let buffer = store.sa_buffer();
    if buffer.is_empty() {
        return;
    }
    let (s, a) = buffer[rng.gen_range(0..buffer.len())];
    let candidates = store.policies_at(s, a);
    let take = params.policies_per_update.min(candidates.len());
    let mut best = f64::NEG_INFINITY;
    for i in sample(rng, candidates.len(), take) {
        let refs = store.suffixes(candidates[i], s, a);
        let longest = refs.iter().map(|&r| store.suffix_len(r)).max().unwrap_or(0);
        let depth = params.max_depth.map_or(longest, |d| d.min(longest));
        // Ê G_n for n = 1..=depth; short suffixes keep their full return.
        let mut means = vec![0.0; depth];
        for &r in refs {
            let g = store.n_step_returns(r, gamma, |n| q.max_row(n));
            for (n, m) in means.iter_mut().enumerate() {
                *m += g[n.min(g.len() - 1)];
            }
        }
        let count = refs.len() as f64;
        let one_step = means[0] / count;
        for m in &means {
            best = best.max(one_step.max(m / count));
        }
    }
    if best.is_finite() {
        q.set(s, a, best);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::{build_traceback, MdpEnv, TraceBackSpec};
    use crate::mdp::fixtures::two_state;
    use crate::mdp::q_star_oracle;

    #[test]
    fn solves_short_trace_back() {
        let mut env = build_traceback(&TraceBackSpec::new(6)).unwrap();
        let log = highway_q_learning(&mut env, &HqlParams::default(), 3).unwrap();
        assert!(log.solved().episodes().is_some(), "{:?}", log.solved());
        let q = log.final_q().unwrap();
        assert_eq!(q.argmax_row(0), 1);
    }

    #[test]
    fn deterministic_given_seed() {
        let mut env = build_traceback(&TraceBackSpec::new(4)).unwrap();
        let a = highway_q_learning(&mut env, &HqlParams::default(), 9).unwrap();
        let b = highway_q_learning(&mut env, &HqlParams::default(), 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn one_step_limit_matches_optimal_values() {
        let mdp = two_state(0.5);
        let mut env = MdpEnv::new(mdp.clone(), 0, 50).unwrap();
        let params = HqlParams {
            max_depth: Some(1),
            policies_per_update: 1,
            epsilon: 1.0,
            update_epochs: Some(50),
            max_episodes: 300,
            stop_when_solved: false,
            ..HqlParams::default()
        };
        let log = highway_q_learning(&mut env, &params, 1).unwrap();
        let q = log.final_q().unwrap();
        let star = q_star_oracle(&mdp, 1e-12).unwrap();
        assert!(q.sup_distance(&star) < 1e-2, "{q:?}");
    }
}
