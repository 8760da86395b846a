//! Deterministic three-policy corridor MDP.
//!
//! ```text
//!            ↗            a1: red pays at step `red_step`, ends
//!  S_A ─────────▶ C1 ─▶ C2 ─▶ ... ─▶ C_{L−1} ─a0─▶ S_Z   (blue, pays at step L)
//!   │                                    └─a1─▶ end      (orange, pays at `orange_step`)
//!   └─↘─▶ end (alt_action_return)
//! ```
//!
//! Two actions everywhere: action 0 (↗ / continue) and action 1 (↘ / leave).
//! Corridor cells without a branch move forward under both actions.

use super::EnvError;
use crate::mdp::{PolicySpec, TabularMdp};

pub const ACTION_UP: usize = 0;
pub const ACTION_DOWN: usize = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeForkSpec {
    /// Transitions from `S_A` to `S_Z` along the blue path.
    pub corridor_length: usize,
    /// Returns of the (blue, orange, red) forks.
    pub fork_returns: [f64; 3],
    /// Return of ↘ at the initial state.
    pub alt_action_return: f64,
    /// Step (counted from `S_A`) at which orange is paid.
    pub orange_step: usize,
    /// Step at which red is paid.
    pub red_step: usize,
    pub discount: f64,
}

impl Default for ThreeForkSpec {
    fn default() -> Self {
        Self {
            corridor_length: 10,
            fork_returns: [9.0, 3.0, -9.0],
            alt_action_return: 5.0,
            orange_step: 10,
            red_step: 2,
            discount: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ThreeFork {
    pub mdp: TabularMdp,
    pub blue: PolicySpec,
    pub orange: PolicySpec,
    pub red: PolicySpec,
    /// Index of `S_A`.
    pub start: usize,
    /// Index of `S_Z`.
    pub goal: usize,
}

impl ThreeFork {
    /// Behavioral policies in (blue, orange, red) order.
    pub fn policies(&self) -> Vec<PolicySpec> {
        vec![self.blue.clone(), self.orange.clone(), self.red.clone()]
    }
}

pub fn build_threefork(spec: &ThreeForkSpec) -> Result<ThreeFork, EnvError> {
    let len = spec.corridor_length;
    if len < 2 {
        return Err(EnvError::Spec("corridor_length must be at least 2".into()));
    }
    if !(2 <= spec.red_step && spec.red_step < spec.orange_step && spec.orange_step <= len) {
        return Err(EnvError::Spec(format!(
            "need 2 <= red_step ({}) < orange_step ({}) <= corridor_length ({len})",
            spec.red_step, spec.orange_step
        )));
    }
    let [blue_r, orange_r, red_r] = spec.fork_returns;
    if blue_r == orange_r || orange_r == red_r || blue_r == red_r {
        return Err(EnvError::Spec("fork returns must be distinct".into()));
    }

    // 0 = S_A, 1..len-1 = corridor C_k, len = S_Z, len + 1 = shared end.
    let start = 0;
    let goal = len;
    let end = len + 1;
    let num_states = len + 2;
    let mut b = TabularMdp::builder(num_states, 2, spec.discount);
    b.edge(start, ACTION_UP, 1, 0.0);
    b.edge(start, ACTION_DOWN, end, spec.alt_action_return);
    let red_branch = spec.red_step - 1;
    let orange_branch = spec.orange_step - 1;
    for k in 1..len {
        let forward = if k + 1 == len { goal } else { k + 1 };
        let forward_r = if k + 1 == len { blue_r } else { 0.0 };
        b.edge(k, ACTION_UP, forward, forward_r);
        if k == red_branch {
            b.edge(k, ACTION_DOWN, end, red_r);
        } else if k == orange_branch {
            b.edge(k, ACTION_DOWN, end, orange_r);
        } else {
            b.edge(k, ACTION_DOWN, forward, forward_r);
        }
    }
    b.terminal(goal).terminal(end);
    let mdp = b.build()?;

    let blue = vec![ACTION_UP; num_states];
    let mut orange = blue.clone();
    let mut red = blue.clone();
    orange[orange_branch] = ACTION_DOWN;
    red[red_branch] = ACTION_DOWN;
    Ok(ThreeFork {
        mdp,
        blue: PolicySpec::deterministic(&blue, 2)?,
        orange: PolicySpec::deterministic(&orange, 2)?,
        red: PolicySpec::deterministic(&red, 2)?,
        start,
        goal,
    })
}
