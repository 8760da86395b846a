//! Delayed-credit toy tasks with two actions.
//!
//! Both tasks last exactly `delay` steps and pay only on the last step.

use super::{EnvError, MdpEnv};
use crate::mdp::TabularMdp;

/// Choice: the first action picks which terminal payout is received.
#[derive(Debug, Clone, PartialEq)]
pub struct ChoiceSpec {
    pub delay: usize,
    pub discount: f64,
    /// Mean terminal reward after first action 0 and 1.
    pub payouts: [f64; 2],
    /// Terminal rewards get `U[−noise, noise]` added.
    pub noise: f64,
}

impl ChoiceSpec {
    pub fn new(delay: usize) -> Self {
        Self { delay, discount: 0.99, payouts: [0.0, 1.0], noise: 0.5 }
    }
}

/// Trace Back: the payout depends on the first two actions.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBackSpec {
    pub delay: usize,
    pub discount: f64,
    /// Terminal reward indexed by `2·first + second`.
    pub payouts: [f64; 4],
}

impl TraceBackSpec {
    pub fn new(delay: usize) -> Self {
        Self { delay, discount: 0.99, payouts: [0.0, 0.0, -1.0, 1.0] }
    }
}

/// States: `0` start, `1 + 2(t−1) + first` for `1 ≤ t < delay`, then terminal.
pub fn build_choice(spec: &ChoiceSpec) -> Result<MdpEnv, EnvError> {
    let t_max = spec.delay;
    if t_max == 0 {
        return Err(EnvError::Spec("delay must be positive".into()));
    }
    let state = |t: usize, first: usize| 1 + 2 * (t - 1) + first;
    let terminal = 1 + 2 * (t_max - 1);
    let mut b = TabularMdp::builder(terminal + 1, 2, spec.discount);
    let mut noisy = Vec::new();
    for a in 0..2 {
        if t_max == 1 {
            b.edge(0, a, terminal, spec.payouts[a]);
            noisy.push((0, a));
        } else {
            b.edge(0, a, state(1, a), 0.0);
        }
    }
    for t in 1..t_max {
        for first in 0..2 {
            let s = state(t, first);
            for a in 0..2 {
                if t + 1 == t_max {
                    b.edge(s, a, terminal, spec.payouts[first]);
                    noisy.push((s, a));
                } else {
                    b.edge(s, a, state(t + 1, first), 0.0);
                }
            }
        }
    }
    b.terminal(terminal);
    let mut env = MdpEnv::new(b.build()?, 0, t_max)?;
    for (s, a) in noisy {
        env = env.with_noise(s, a, spec.noise);
    }
    Ok(env)
}

/// States: `0` start, `1 + first` at `t = 1`, `3 + 4(t−2) + pair` for
/// `2 ≤ t < delay`, then terminal.
pub fn build_traceback(spec: &TraceBackSpec) -> Result<MdpEnv, EnvError> {
    let t_max = spec.delay;
    if t_max < 2 {
        return Err(EnvError::Spec("trace back needs delay >= 2".into()));
    }
    let pair_state = |t: usize, pair: usize| 3 + 4 * (t - 2) + pair;
    let terminal = 3 + 4 * (t_max - 2);
    let mut b = TabularMdp::builder(terminal + 1, 2, spec.discount);
    for a in 0..2 {
        b.edge(0, a, 1 + a, 0.0);
    }
    for first in 0..2 {
        for a in 0..2 {
            let pair = 2 * first + a;
            if t_max == 2 {
                b.edge(1 + first, a, terminal, spec.payouts[pair]);
            } else {
                b.edge(1 + first, a, pair_state(2, pair), 0.0);
            }
        }
    }
    for t in 2..t_max {
        for pair in 0..4 {
            let s = pair_state(t, pair);
            for a in 0..2 {
                if t + 1 == t_max {
                    b.edge(s, a, terminal, spec.payouts[pair]);
                } else {
                    b.edge(s, a, pair_state(t + 1, pair), 0.0);
                }
            }
        }
    }
    b.terminal(terminal);
    MdpEnv::new(b.build()?, 0, t_max)
}
