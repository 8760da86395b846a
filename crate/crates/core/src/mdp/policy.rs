use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{MdpError, QTable, PROB_TOL};

/// Stochastic policy table `π[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySpec {
    num_states: usize,
    num_actions: usize,
    probs: Vec<f64>,
}

impl PolicySpec {
    pub fn new(num_states: usize, num_actions: usize, probs: Vec<f64>) -> Result<Self, MdpError> {
        if probs.len() != num_states * num_actions {
            return Err(MdpError::Shape { expected: (num_states, num_actions), found: probs.len() });
        }
        for s in 0..num_states {
            let row = &probs[s * num_actions..(s + 1) * num_actions];
            if let Some(a) = row.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(MdpError::NegativeProbability { state: s, action: a, next_state: None, value: row[a] });
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > PROB_TOL {
                return Err(MdpError::PolicyRowSum { state: s, sum });
            }
        }
        Ok(Self { num_states, num_actions, probs })
    }

    pub fn uniform(num_states: usize, num_actions: usize) -> Self {
        Self { num_states, num_actions, probs: vec![1.0 / num_actions as f64; num_states * num_actions] }
    }

    /// One action per state with probability one.
    pub fn deterministic(actions: &[usize], num_actions: usize) -> Result<Self, MdpError> {
        let mut probs = vec![0.0; actions.len() * num_actions];
        for (s, &a) in actions.iter().enumerate() {
            if a >= num_actions {
                return Err(MdpError::IndexOutOfRange { what: "action", index: a, bound: num_actions });
            }
            probs[s * num_actions + a] = 1.0;
        }
        Ok(Self { num_states: actions.len(), num_actions, probs })
    }

    pub fn num_states(&self) -> usize {
        self.num_states
    }

    pub fn num_actions(&self) -> usize {
        self.num_actions
    }

    #[inline]
    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.num_actions + a]
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// The action taken with probability one at `s`, if the row is deterministic.
    pub fn deterministic_action(&self, s: usize) -> Option<usize> {
        self.row(s).iter().position(|&p| p == 1.0)
    }

    /// `Σ_a π(a|s) q(s, a)`.
    pub fn expected_value(&self, q: &QTable, s: usize) -> f64 {
        self.row(s).iter().zip(q.row(s)).map(|(p, v)| p * v).sum()
    }
}

/// Deterministic greedy policy of `q`, ties broken by the lowest action index.
pub fn greedy_policy(q: &QTable) -> PolicySpec {
    let actions: Vec<usize> = (0..q.num_states()).map(|s| q.argmax_row(s)).collect();
    PolicySpec::deterministic(&actions, q.num_actions()).expect("argmax is in range")
}

/// ε-greedy policy: `1 − ε + ε/|A|` on the greedy action, `ε/|A|` elsewhere.
pub fn epsilon_greedy(q: &QTable, eps: f64) -> Result<PolicySpec, MdpError> {
    if !(0.0..=1.0).contains(&eps) {
        return Err(MdpError::Epsilon(eps));
    }
    let na = q.num_actions();
    let explore = eps / na as f64;
    let mut probs = vec![explore; q.num_states() * na];
    for s in 0..q.num_states() {
        probs[s * na + q.argmax_row(s)] += 1.0 - eps;
    }
    Ok(PolicySpec { num_states: q.num_states(), num_actions: na, probs })
}

/// Ordered behavioral policy set with FIFO eviction and a selection
/// distribution over its members.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicySet {
    policies: VecDeque<PolicySpec>,
    capacity: usize,
    selection: Vec<f64>,
}

impl PolicySet {
    pub fn new(capacity: usize) -> Result<Self, MdpError> {
        if capacity == 0 {
            return Err(MdpError::Capacity);
        }
        Ok(Self { policies: VecDeque::new(), capacity, selection: Vec::new() })
    }

    /// Set holding `policies` with uniform selection and capacity equal to
    /// their count.
    pub fn uniform(policies: Vec<PolicySpec>) -> Result<Self, MdpError> {
        let mut set = Self::new(policies.len().max(1))?;
        for p in policies {
            set.push(p);
        }
        Ok(set)
    }

    /// Replaces the selection distribution; must match the current length.
    pub fn with_selection(mut self, selection: Vec<f64>) -> Result<Self, MdpError> {
        check_distribution(&selection, self.policies.len())?;
        self.selection = selection;
        Ok(self)
    }

    /// Appends a policy, evicting the oldest when at capacity. Selection
    /// resets to uniform over the new contents.
    pub fn push(&mut self, policy: PolicySpec) {
        if self.policies.len() == self.capacity {
            self.policies.pop_front();
        }
        self.policies.push_back(policy);
        let n = self.policies.len();
        self.selection = vec![1.0 / n as f64; n];
    }

    pub fn len(&self) -> usize {
        self.policies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.policies.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn selection(&self) -> &[f64] {
        &self.selection
    }

    pub fn get(&self, i: usize) -> Option<&PolicySpec> {
        self.policies.get(i)
    }

    pub fn iter(&self) -> impl Iterator<Item = &PolicySpec> {
        self.policies.iter()
    }
}

pub(crate) fn check_distribution(weights: &[f64], len: usize) -> Result<(), MdpError> {
    if weights.len() != len {
        return Err(MdpError::Distribution(format!("expected {len} weights, found {}", weights.len())));
    }
    if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(MdpError::Distribution("weights must be finite and nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if len > 0 && (sum - 1.0).abs() > PROB_TOL {
        return Err(MdpError::Distribution(format!("weights sum to {sum}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(rows: &[&[f64]]) -> QTable {
        QTable::from_values(rows.len(), rows[0].len(), rows.concat()).unwrap()
    }

    #[test]
    fn greedy_examples() {
        let g = greedy_policy(&q(&[&[1.0, 3.0, 2.0]]));
        assert_eq!(g.deterministic_action(0), Some(1));
        let g = greedy_policy(&q(&[&[5.0, 5.0]]));
        assert_eq!(g.deterministic_action(0), Some(0));
    }

    #[test]
    fn epsilon_greedy_examples() {
        let table = q(&[&[2.0, 1.0], &[0.0, 4.0]]);
        assert_eq!(epsilon_greedy(&table, 0.0).unwrap(), greedy_policy(&table));
        let uni = epsilon_greedy(&table, 1.0).unwrap();
        assert!(uni.probs().iter().all(|&p| (p - 0.5).abs() < 1e-15));
        let p = epsilon_greedy(&table, 0.2).unwrap();
        assert!((p.prob(0, 0) - 0.9).abs() < 1e-15);
        assert!((p.prob(0, 1) - 0.1).abs() < 1e-15);
        assert!(matches!(epsilon_greedy(&table, 1.5), Err(MdpError::Epsilon(_))));
        assert!(epsilon_greedy(&table, -0.1).is_err());
    }

    #[test]
    fn policy_rows_validated() {
        assert!(matches!(PolicySpec::new(1, 2, vec![0.7, 0.2]), Err(MdpError::PolicyRowSum { state: 0, .. })));
        assert!(PolicySpec::new(1, 2, vec![1.2, -0.2]).is_err());
        assert!(PolicySpec::deterministic(&[3], 2).is_err());
    }

    #[test]
    fn fifo_eviction_keeps_uniform_selection() {
        let mut set = PolicySet::new(2).unwrap();
        for a in 0..3 {
            set.push(PolicySpec::deterministic(&[a], 3).unwrap());
        }
        assert_eq!(set.len(), 2);
        assert_eq!(set.get(0).unwrap().deterministic_action(0), Some(1));
        assert_eq!(set.get(1).unwrap().deterministic_action(0), Some(2));
        assert_eq!(set.selection(), &[0.5, 0.5]);
        assert!(set.clone().with_selection(vec![0.3, 0.3]).is_err());
        let set = set.with_selection(vec![0.25, 0.75]).unwrap();
        assert_eq!(set.selection(), &[0.25, 0.75]);
        assert!(PolicySet::new(0).is_err());
    }
}
