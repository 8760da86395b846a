//! Model-based planners on state values.
//!
//! Sample counts tally model row queries: each `(s, a)` whose transition row
//! is read counts once per sweep. Greedy extraction shares the rows read by
//! the optimality backup on the same values.

use serde::{Deserialize, Serialize};

use super::AlgorithmError;
use crate::mdp::{argmax, PolicySet, PolicySpec, TabularMdp, VTable};
use crate::operators::LookaheadSet;

/// One planner iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningLogEntry {
    pub iteration: usize,
    /// Cumulative model row queries.
    pub samples: u64,
    pub residual: f64,
    /// Iterations at which the queued policies were added, oldest first.
    pub policy_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanningReport {
    pub v: VTable,
    pub iterations: usize,
    pub samples: u64,
    pub residual: f64,
    pub converged: bool,
    pub log: Vec<PlanningLogEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HviParams {
    pub error_bound: f64,
    pub capacity: usize,
    pub add_interval: usize,
    pub lookahead: LookaheadSet,
    pub max_iters: usize,
}

impl HviParams {
    /// `N = 1..=10`, five queued policies, a new one every 7 iterations.
    pub fn multiroom_defaults() -> Self {
        Self {
            error_bound: 1e-10,
            capacity: 5,
            add_interval: 7,
            lookahead: LookaheadSet::range(1, 10).expect("valid range"),
            max_iters: 100_000,
        }
    }

    fn validate(&self) -> Result<(), AlgorithmError> {
        if !(self.error_bound > 0.0) {
            return Err(AlgorithmError::Params("error_bound must be positive".into()));
        }
        if self.capacity == 0 || self.add_interval == 0 || self.max_iters == 0 {
            return Err(AlgorithmError::Params("capacity, add_interval and max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// `r(s,a) + γ E V(s')`, zero on terminal states.
fn action_value(mdp: &TabularMdp, v: &[f64], s: usize, a: usize) -> f64 {
    mdp.reward(s, a) + mdp.discount() * mdp.expect_next(s, a, |n| v[n])
}

fn optimality_backup(mdp: &TabularMdp, v: &[f64]) -> Vec<f64> {
    (0..mdp.num_states())
        .map(|s| {
            if mdp.is_terminal(s) {
                0.0
            } else {
                (0..mdp.num_actions()).map(|a| action_value(mdp, v, s, a)).fold(f64::NEG_INFINITY, f64::max)
            }
        })
        .collect()
}

fn expectation_backup(mdp: &TabularMdp, pi: &PolicySpec, v: &[f64]) -> Vec<f64> {
    (0..mdp.num_states())
        .map(|s| {
            if mdp.is_terminal(s) {
                return 0.0;
            }
            pi.row(s).iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(a, &p)| p * action_value(mdp, v, s, a)).sum()
        })
        .collect()
}

fn greedy(mdp: &TabularMdp, v: &[f64]) -> PolicySpec {
    let actions: Vec<usize> = (0..mdp.num_states())
        .map(|s| {
            let row: Vec<f64> = (0..mdp.num_actions()).map(|a| action_value(mdp, v, s, a)).collect();
            argmax(&row)
        })
        .collect();
    PolicySpec::deterministic(&actions, mdp.num_actions()).expect("valid actions")
}

/// Row queries made by one expectation backup under `pi`.
fn policy_queries(mdp: &TabularMdp, pi: &PolicySpec) -> u64 {
    (0..mdp.num_states())
        .filter(|&s| !mdp.is_terminal(s))
        .map(|s| pi.row(s).iter().filter(|&&p| p > 0.0).count() as u64)
        .sum()
}

fn full_queries(mdp: &TabularMdp) -> u64 {
    let live = (0..mdp.num_states()).filter(|&s| !mdp.is_terminal(s)).count();
    (live * mdp.num_actions()) as u64
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn run(
    mdp: &TabularMdp,
    tol: f64,
    max_iters: usize,
    mut step: impl FnMut(usize, &[f64]) -> (Vec<f64>, u64, Vec<usize>),
) -> Result<PlanningReport, AlgorithmError> {
    if !(tol > 0.0) {
        return Err(AlgorithmError::Params("tolerance must be positive".into()));
    }
    let mut v = vec![0.0; mdp.num_states()];
    let mut samples = 0u64;
    let mut log = Vec::new();
    let mut residual = f64::INFINITY;
    for k in 1..=max_iters {
        let (next, cost, policy_set) = step(k, &v);
        samples += cost;
        residual = sup_distance(&next, &v);
        v = next;
        log.push(PlanningLogEntry { iteration: k, samples, residual, policy_set });
        if !residual.is_finite() {
            break;
        }
        if residual <= tol {
            return Ok(PlanningReport {
                v: VTable::from_vec(v),
                iterations: k,
                samples,
                residual,
                converged: true,
                log,
            });
        }
    }
    Err(AlgorithmError::NotConverged { iterations: log.len(), residual })
}

/// Value iteration `V ← B V` from `V = 0` until `‖V_k − V_{k−1}‖∞ ≤ tol`.
pub fn value_iteration(mdp: &TabularMdp, tol: f64, max_iters: usize) -> Result<PlanningReport, AlgorithmError> {
    let cost = full_queries(mdp);
    run(mdp, tol, max_iters, |_, v| (optimality_backup(mdp, v), cost, Vec::new()))
}

/// Policy iteration with truncated evaluation: each iteration takes the
/// greedy policy `π` of `V` and sets `V ← (B^π)^depth V`.
pub fn policy_iteration(
    mdp: &TabularMdp,
    eval_depth: usize,
    tol: f64,
    max_iters: usize,
) -> Result<PlanningReport, AlgorithmError> {
    if eval_depth == 0 {
        return Err(AlgorithmError::Params("eval_depth must be positive".into()));
    }
    let full = full_queries(mdp);
    run(mdp, tol, max_iters, |_, v| {
        let pi = greedy(mdp, v);
        let mut cost = full;
        let mut next = v.to_vec();
        for i in 0..eval_depth {
            next = expectation_backup(mdp, &pi, &next);
            if i > 0 {
                cost += policy_queries(mdp, &pi);
            }
        }
        (next, cost, Vec::new())
    })
}

/// Highway value iteration on state values.
///
/// Starts from `V = 0` and an empty policy queue. At iterations
/// `k ≡ 1 (mod K)` the greedy policy of `V_{k−1}` joins the FIFO queue;
/// then `V_k(s) = E_{π,n} max(B V, (B^π)^{n−1} B V)(s)` with uniform
/// selection over the queue.
pub fn highway_value_iteration(mdp: &TabularMdp, params: &HviParams) -> Result<PlanningReport, AlgorithmError> {
    params.validate()?;
    let mut queue = PolicySet::new(params.capacity)?;
    let mut added: std::collections::VecDeque<usize> = std::collections::VecDeque::new();
    let depths = params.lookahead.depths();
    let weights = params.lookahead.selection();
    let full = full_queries(mdp);
    run(mdp, params.error_bound, params.max_iters, |k, v| {
        let mut cost = full;
        if (k - 1) % params.add_interval == 0 {
            queue.push(greedy(mdp, v));
            added.push_back(k);
            if added.len() > params.capacity {
                added.pop_front();
            }
        }
        let bv = optimality_backup(mdp, v);
        let mut next = vec![0.0; v.len()];
        for (pi, &wp) in queue.iter().zip(queue.selection()) {
            let mut chain = bv.clone();
            let mut depth = 1;
            for (&n, &wn) in depths.iter().zip(weights) {
                while depth < n {
                    chain = expectation_backup(mdp, pi, &chain);
                    cost += policy_queries(mdp, pi);
                    depth += 1;
                }
                for s in 0..next.len() {
                    next[s] += wp * wn * bv[s].max(chain[s]);
                }
            }
        }
        (next, cost, added.iter().copied().collect())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::fixtures::two_state;

    #[test]
    fn value_iteration_two_state() {
        let r = value_iteration(&two_state(0.5), 1e-12, 1000).unwrap();
        assert!((r.v.get(0) - 2.0).abs() < 1e-11);
        assert_eq!(r.v.get(1), 0.0);
        // Two live rows queried per iteration.
        assert_eq!(r.samples, 2 * r.iterations as u64);
    }

    #[test]
    fn zero_discount_converges_fast() {
        let r = value_iteration(&two_state(0.0), 1e-12, 1000).unwrap();
        assert!(r.iterations <= 2);
        let r = policy_iteration(&two_state(0.0), 10, 1e-12, 1000).unwrap();
        assert!(r.iterations <= 2);
    }

    #[test]
    fn single_depth_hvi_matches_vi_sequence() {
        let mdp = two_state(0.8);
        let vi = value_iteration(&mdp, 1e-10, 10_000).unwrap();
        for capacity in [1, 3] {
            let params = HviParams {
                error_bound: 1e-10,
                capacity,
                add_interval: 1,
                lookahead: LookaheadSet::single(1).unwrap(),
                max_iters: 10_000,
            };
            let hvi = highway_value_iteration(&mdp, &params).unwrap();
            assert_eq!(hvi.iterations, vi.iterations);
            // Averaging identical values over several policies only rounds.
            let tol = if capacity == 1 { 0.0 } else { 1e-12 };
            for (a, b) in hvi.log.iter().zip(&vi.log) {
                assert!((a.residual - b.residual).abs() <= tol);
            }
            assert!(hvi.v.sup_distance(&vi.v) <= tol);
        }
    }

    #[test]
    fn non_convergence_is_an_error() {
        assert!(matches!(
            value_iteration(&two_state(0.99), 1e-12, 3),
            Err(AlgorithmError::NotConverged { iterations: 3, .. })
        ));
    }
}
