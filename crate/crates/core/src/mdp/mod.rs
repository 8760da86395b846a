//! Finite MDP model, value tables, policies and exact oracles.
//!
//! Rewards are stored as their expectation `r(s, a)`. Transition rows are
//! kept as `(next_state, probability)` lists; value tables are dense.
//! Terminal states are absorbing with zero reward and contribute zero
//! value to any backup that reaches them.

mod file;
mod oracle;
mod policy;
mod tables;

use thiserror::Error;

pub use file::{load_mdp, save_mdp, MdpFile, RewardEntry, TransitionEntry};
pub use oracle::{q_pi_oracle, q_star_oracle, v_pi_oracle};
pub(crate) use policy::check_distribution;
pub use policy::{epsilon_greedy, greedy_policy, PolicySet, PolicySpec};
pub use tables::{argmax, QTable, VTable};

/// Row-sum tolerance for transition and policy rows.
pub const PROB_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum MdpError {
    #[error("MDP must have at least one state and one action")]
    Empty,
    #[error("discount {0} outside [0, 1]")]
    Discount(f64),
    #[error("{what} index {index} out of range (< {bound})")]
    IndexOutOfRange { what: &'static str, index: usize, bound: usize },
    #[error("negative or non-finite probability {value} at state {state}, action {action}{}",
        next_state.map(|n| format!(", next state {n}")).unwrap_or_default())]
    NegativeProbability { state: usize, action: usize, next_state: Option<usize>, value: f64 },
    #[error("transition row (state {state}, action {action}) sums to {sum}, expected 1")]
    RowSum { state: usize, action: usize, sum: f64 },
    #[error("policy row at state {state} sums to {sum}, expected 1")]
    PolicyRowSum { state: usize, sum: f64 },
    #[error("terminal state {state} must self-loop with zero reward (action {action})")]
    TerminalNotAbsorbing { state: usize, action: usize },
    #[error("non-finite value at state {state}, action {action}")]
    NonFinite { state: usize, action: usize },
    #[error("gamma = 1 requires an episodic MDP; worst-case survival probability after {steps} steps is {survival}")]
    NotEpisodic { steps: usize, survival: f64 },
    #[error("table shape mismatch: expected {expected:?} cells, found {found}")]
    Shape { expected: (usize, usize), found: usize },
    #[error("epsilon {0} outside [0, 1]")]
    Epsilon(f64),
    #[error("policy set capacity must be positive")]
    Capacity,
    #[error("invalid selection distribution: {0}")]
    Distribution(String),
    #[error("oracle did not reach tolerance {tol} within {iterations} iterations (residual {residual})")]
    OracleStalled { tol: f64, iterations: usize, residual: f64 },
    #[error("tolerance must be positive, got {0}")]
    Tolerance(f64),
    #[error("MDP file: {0}")]
    File(String),
}

/// Finite MDP with expected rewards.
#[derive(Debug, Clone, PartialEq)]
pub struct TabularMdp {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    transitions: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    terminal: Vec<bool>,
}

impl TabularMdp {
    pub fn builder(num_states: usize, num_actions: usize, discount: f64) -> MdpBuilder {
        MdpBuilder {
            num_states,
            num_actions,
            discount,
            transitions: vec![Vec::new(); num_states * num_actions],
            reward: vec![0.0; num_states * num_actions],
            terminal: vec![false; num_states],
        }
    }

    #[inline]
    pub fn num_states(&self) -> usize {
        self.num_states
    }

    #[inline]
    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn discount(&self) -> f64 {
        self.discount
    }

    #[inline]
    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.num_actions + a]
    }

    #[inline]
    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn terminal_flags(&self) -> &[bool] {
        &self.terminal
    }

    /// Successor distribution of `(s, a)` as `(next_state, probability)`.
    #[inline]
    pub fn successors(&self, s: usize, a: usize) -> &[(usize, f64)] {
        &self.transitions[s * self.num_actions + a]
    }

    /// `P[s][a][s']` (dense lookup; linear in the row length).
    pub fn transition_prob(&self, s: usize, a: usize, next: usize) -> f64 {
        self.successors(s, a).iter().filter(|(n, _)| *n == next).map(|(_, p)| p).sum()
    }

    /// `Σ_{s'} P(s'|s,a) f(s')`, with terminal successors contributing zero.
    #[inline]
    pub fn expect_next(&self, s: usize, a: usize, mut f: impl FnMut(usize) -> f64) -> f64 {
        let mut acc = 0.0;
        for &(n, p) in self.successors(s, a) {
            if !self.terminal[n] {
                acc += p * f(n);
            }
        }
        acc
    }

    pub fn max_abs_reward(&self) -> f64 {
        self.reward.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Number of stored nonzero transition entries.
    pub fn nnz(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    /// Every policy reaches a terminal state with probability one.
    ///
    /// Runs the worst-case survival recursion `u ← max_a P_nonterminal u`
    /// from `u = 1`; the restricted kernel has spectral radius below one for
    /// every policy iff survival after `|S_nt|` steps is below one everywhere.
    pub fn episodic_check(&self) -> Result<(), MdpError> {
        let steps = self.terminal.iter().filter(|t| !**t).count().max(1);
        let mut u: Vec<f64> = self.terminal.iter().map(|&t| if t { 0.0 } else { 1.0 }).collect();
        let mut next = vec![0.0; self.num_states];
        for _ in 0..steps {
            for s in 0..self.num_states {
                next[s] = if self.terminal[s] {
                    0.0
                } else {
                    (0..self.num_actions).map(|a| self.expect_next(s, a, |n| u[n])).fold(0.0, f64::max)
                };
            }
            std::mem::swap(&mut u, &mut next);
        }
        let survival = u.iter().copied().fold(0.0, f64::max);
        if survival < 1.0 - 1e-12 {
            Ok(())
        } else {
            Err(MdpError::NotEpisodic { steps, survival })
        }
    }
}

/// Incremental constructor for [`TabularMdp`]; `build` validates every
/// invariant and reports the first violation.
#[derive(Debug, Clone)]
pub struct MdpBuilder {
    num_states: usize,
    num_actions: usize,
    discount: f64,
    transitions: Vec<Vec<(usize, f64)>>,
    reward: Vec<f64>,
    terminal: Vec<bool>,
}

impl MdpBuilder {
    /// Adds probability mass `p` to `P[s][a][next]`.
    pub fn transition(&mut self, s: usize, a: usize, next: usize, p: f64) -> &mut Self {
        let row = &mut self.transitions[s * self.num_actions + a];
        match row.iter_mut().find(|(n, _)| *n == next) {
            Some(entry) => entry.1 += p,
            None => row.push((next, p)),
        }
        self
    }

    pub fn reward(&mut self, s: usize, a: usize, r: f64) -> &mut Self {
        self.reward[s * self.num_actions + a] = r;
        self
    }

    /// Deterministic move with reward.
    pub fn edge(&mut self, s: usize, a: usize, next: usize, r: f64) -> &mut Self {
        self.transition(s, a, next, 1.0).reward(s, a, r)
    }

    /// Marks `s` terminal; its rows become zero-reward self-loops at build.
    pub fn terminal(&mut self, s: usize) -> &mut Self {
        self.terminal[s] = true;
        self
    }

    pub fn build(mut self) -> Result<TabularMdp, MdpError> {
        let (ns, na) = (self.num_states, self.num_actions);
        if ns == 0 || na == 0 {
            return Err(MdpError::Empty);
        }
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(MdpError::Discount(self.discount));
        }
        for s in 0..ns {
            for a in 0..na {
                let idx = s * na + a;
                if self.terminal[s] {
                    let row = &self.transitions[idx];
                    let loops = row.iter().all(|(n, p)| *n == s || *p == 0.0);
                    if !loops || self.reward[idx] != 0.0 {
                        return Err(MdpError::TerminalNotAbsorbing { state: s, action: a });
                    }
                    self.transitions[idx] = vec![(s, 1.0)];
                    continue;
                }
                let mut sum = 0.0;
                for &(n, p) in &self.transitions[idx] {
                    if n >= ns {
                        return Err(MdpError::IndexOutOfRange { what: "next state", index: n, bound: ns });
                    }
                    if !(p.is_finite() && p >= 0.0) {
                        return Err(MdpError::NegativeProbability {
                            state: s,
                            action: a,
                            next_state: Some(n),
                            value: p,
                        });
                    }
                    sum += p;
                }
                if (sum - 1.0).abs() > PROB_TOL {
                    return Err(MdpError::RowSum { state: s, action: a, sum });
                }
                if !self.reward[idx].is_finite() {
                    return Err(MdpError::NonFinite { state: s, action: a });
                }
                self.transitions[idx].retain(|(_, p)| *p > 0.0);
            }
        }
        let mdp = TabularMdp {
            num_states: ns,
            num_actions: na,
            discount: self.discount,
            transitions: self.transitions,
            reward: self.reward,
            terminal: self.terminal,
        };
        if mdp.discount >= 1.0 {
            mdp.episodic_check()?;
        }
        Ok(mdp)
    }
}


#[cfg(test)]
mod tests {
    use super::fixtures::two_state;
    use super::*;

    #[test]
    fn builder_fills_terminal_self_loops() {
        let m = two_state(0.5);
        assert_eq!(m.successors(1, 0), &[(1, 1.0)]);
        assert_eq!(m.reward(1, 1), 0.0);
        assert_eq!(m.transition_prob(0, 1, 0), 1.0);
    }

    #[test]
    fn builder_reports_first_violation() {
        let mut b = TabularMdp::builder(2, 1, 0.9);
        b.transition(0, 0, 1, 0.5);
        b.edge(1, 0, 0, 0.0);
        assert!(matches!(b.build(), Err(MdpError::RowSum { state: 0, action: 0, .. })));

        let mut b = TabularMdp::builder(1, 1, 0.9);
        b.transition(0, 0, 0, 1.5).transition(0, 0, 0, -0.5);
        assert!(b.build().is_ok());

        let mut b = TabularMdp::builder(2, 1, 0.9);
        b.edge(0, 0, 1, 0.0).edge(1, 0, 0, 3.0).terminal(1);
        assert!(matches!(b.build(), Err(MdpError::TerminalNotAbsorbing { state: 1, .. })));

        let mut b = TabularMdp::builder(1, 1, 0.9);
        b.edge(0, 0, 4, 0.0);
        assert!(matches!(b.build(), Err(MdpError::IndexOutOfRange { index: 4, .. })));
        assert!(matches!(TabularMdp::builder(1, 1, 1.5).build(), Err(MdpError::Discount(_))));
    }

    #[test]
    fn gamma_one_requires_episodic() {
        // a1 self-loop at s0 never terminates.
        let mut b = TabularMdp::builder(2, 2, 1.0);
        b.edge(0, 0, 1, 0.0).edge(0, 1, 0, 1.0).terminal(1);
        assert!(matches!(b.build(), Err(MdpError::NotEpisodic { .. })));

        let mut b = TabularMdp::builder(3, 2, 1.0);
        b.edge(0, 0, 1, 0.0).edge(0, 1, 2, 1.0);
        b.transition(1, 0, 2, 0.5).transition(1, 0, 0, 0.5).reward(1, 0, 1.0);
        b.edge(1, 1, 2, 0.0).terminal(2);
        assert!(b.build().is_ok());
    }
}
