use rand::seq::index::sample;
use rand::Rng;

use super::EnvError;
use crate::mdp::{PolicySpec, TabularMdp};

/// Parameters for [`random_mdp`].
#[derive(Debug, Clone, PartialEq)]
pub struct RandomMdpSpec {
    pub num_states: usize,
    pub num_actions: usize,
    pub discount: f64,
    /// Successors per `(s, a)` row, clamped to `num_states`.
    pub branching: usize,
    /// The last `terminal_states` indices are terminal.
    pub terminal_states: usize,
    /// Rewards are drawn from `U[−reward_scale, reward_scale]`.
    pub reward_scale: f64,
}

impl RandomMdpSpec {
    pub fn new(num_states: usize, num_actions: usize, discount: f64) -> Self {
        Self { num_states, num_actions, discount, branching: 3, terminal_states: 0, reward_scale: 1.0 }
    }

    pub fn branching(mut self, b: usize) -> Self {
        self.branching = b;
        self
    }

    pub fn terminal_states(mut self, k: usize) -> Self {
        self.terminal_states = k;
        self
    }

    pub fn reward_scale(mut self, scale: f64) -> Self {
        self.reward_scale = scale;
        self
    }
}

/// Random sparse MDP.
///
/// With `discount = 1` every non-terminal row gets some mass on a terminal
/// state, so the result is episodic.
pub fn random_mdp<R: Rng + ?Sized>(rng: &mut R, spec: &RandomMdpSpec) -> Result<TabularMdp, EnvError> {
    let (ns, na) = (spec.num_states, spec.num_actions);
    if spec.terminal_states >= ns {
        return Err(EnvError::Spec("need at least one non-terminal state".into()));
    }
    if spec.discount >= 1.0 && spec.terminal_states == 0 {
        return Err(EnvError::Spec("undiscounted random MDPs need a terminal state".into()));
    }
    let first_terminal = ns - spec.terminal_states;
    let branching = spec.branching.clamp(1, ns);
    let mut b = TabularMdp::builder(ns, na, spec.discount);
    for s in 0..first_terminal {
        for a in 0..na {
            let mut succ = sample(rng, ns, branching).into_vec();
            if spec.discount >= 1.0 && !succ.iter().any(|&n| n >= first_terminal) {
                succ[0] = rng.gen_range(first_terminal..ns);
            }
            let weights: Vec<f64> = succ.iter().map(|_| rng.gen_range(0.05..1.0)).collect();
            let total: f64 = weights.iter().sum();
            for (&n, w) in succ.iter().zip(&weights) {
                b.transition(s, a, n, w / total);
            }
            b.reward(s, a, rng.gen_range(-1.0..=1.0) * spec.reward_scale);
        }
    }
    for s in first_terminal..ns {
        b.terminal(s);
    }
    Ok(b.build()?)
}

/// Random stochastic policy with every action probability bounded away from 0.
pub fn random_policy<R: Rng + ?Sized>(rng: &mut R, num_states: usize, num_actions: usize) -> PolicySpec {
    let mut probs = Vec::with_capacity(num_states * num_actions);
    for _ in 0..num_states {
        let row: Vec<f64> = (0..num_actions).map(|_| rng.gen_range(0.05..1.0)).collect();
        let total: f64 = row.iter().sum();
        probs.extend(row.iter().map(|w| w / total));
    }
    PolicySpec::new(num_states, num_actions, probs).expect("normalized rows")
}
