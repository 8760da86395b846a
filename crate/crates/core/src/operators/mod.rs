//! Exact Bellman-style operators on [`QTable`]s.
//!
//! Every operator is evaluated in expectation over the transition kernel and
//! the policies; nothing here samples. The building block is the `n`-step
//! expected return `(B^π)^{n−1} B q`: one optimality backup followed by
//! `n − 1` expectation backups under a behavioral policy. The highway family
//! gates that return against the one-step backup and aggregates the gated
//! values over policies and depths.

mod config;
mod fixed_point;

use thiserror::Error;

pub use config::{Aggregation, HighwayConfig, LookaheadSet};
pub use fixed_point::{fixed_point, FixedPointReport, DEFAULT_MAX_ITERS, DEFAULT_TOL};

use crate::mdp::{MdpError, PolicySet, PolicySpec, QTable, TabularMdp};

/// Softmax weights below this are flushed to zero.
const SMAX_FLUSH: f64 = 1e-300;

#[derive(Debug, Error)]
pub enum OperatorError {
    #[error("behavioral policy set is empty")]
    EmptyPolicySet,
    #[error("lookahead set is empty")]
    EmptyLookahead,
    #[error("lookahead depth must be at least 1, got {0}")]
    InvalidDepth(usize),
    #[error("softmax temperature must be positive, got {0}")]
    Temperature(f64),
    #[error("smax of an empty vector")]
    EmptyValues,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

pub(crate) fn check_q(mdp: &TabularMdp, q: &QTable) -> Result<(), OperatorError> {
    if q.num_states() != mdp.num_states() || q.num_actions() != mdp.num_actions() {
        return Err(OperatorError::Shape(format!(
            "table is {}x{}, MDP is {}x{}",
            q.num_states(),
            q.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    Ok(())
}

pub(crate) fn check_policy(mdp: &TabularMdp, pi: &PolicySpec) -> Result<(), OperatorError> {
    if pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() {
        return Err(OperatorError::Shape(format!(
            "policy is {}x{}, MDP is {}x{}",
            pi.num_states(),
            pi.num_actions(),
            mdp.num_states(),
            mdp.num_actions()
        )));
    }
    Ok(())
}

/// `out(s,a) = r(s,a) + γ Σ P(s'|s,a) cont(s')`, zero on terminal rows.
fn backup(mdp: &TabularMdp, cont: &[f64]) -> QTable {
    let gamma = mdp.discount();
    QTable::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| {
        if mdp.is_terminal(s) {
            0.0
        } else {
            mdp.reward(s, a) + gamma * mdp.expect_next(s, a, |n| cont[n])
        }
    })
}

/// Bellman optimality backup `B q`.
///
/// Panics if `q` does not match the MDP's shape.
pub fn bellman_optimality(mdp: &TabularMdp, q: &QTable) -> QTable {
    check_q(mdp, q).expect("bellman_optimality");
    let cont: Vec<f64> = (0..mdp.num_states()).map(|s| q.max_row(s)).collect();
    backup(mdp, &cont)
}

/// Bellman expectation backup `B^π q`.
///
/// Panics on shape mismatch.
pub fn bellman_expectation(mdp: &TabularMdp, pi: &PolicySpec, q: &QTable) -> QTable {
    check_q(mdp, q).expect("bellman_expectation");
    check_policy(mdp, pi).expect("bellman_expectation");
    let cont: Vec<f64> = (0..mdp.num_states()).map(|s| pi.expected_value(q, s)).collect();
    backup(mdp, &cont)
}

/// `[(B^π)^0 B q, (B^π)^1 B q, ..., (B^π)^{depth−1} B q]` starting from a
/// precomputed `B q`.
fn chain_from(mdp: &TabularMdp, pi: &PolicySpec, bq: &QTable, depth: usize) -> Vec<QTable> {
    let mut out = Vec::with_capacity(depth);
    out.push(bq.clone());
    for k in 1..depth {
        let next = bellman_expectation(mdp, pi, &out[k - 1]);
        out.push(next);
    }
    out
}

/// Expected `n`-step returns for every depth `1..=depth`, sharing the prefix.
pub fn n_step_chain(mdp: &TabularMdp, pi: &PolicySpec, q: &QTable, depth: usize) -> Result<Vec<QTable>, OperatorError> {
    check_q(mdp, q)?;
    check_policy(mdp, pi)?;
    if depth == 0 {
        return Err(OperatorError::InvalidDepth(0));
    }
    Ok(chain_from(mdp, pi, &bellman_optimality(mdp, q), depth))
}

/// `(B^π)^{n−1} B q`.
pub fn n_step_return_operator(
    mdp: &TabularMdp,
    pi: &PolicySpec,
    n: usize,
    q: &QTable,
) -> Result<QTable, OperatorError> {
    Ok(n_step_chain(mdp, pi, q, n)?.pop().expect("depth >= 1"))
}

/// Softmax-weighted average `Σ w_x x` with `w ∝ exp(α x)`.
///
/// `alpha = +∞` returns the maximum.
pub fn smax(values: &[f64], alpha: f64) -> Result<f64, OperatorError> {
    if values.is_empty() {
        return Err(OperatorError::EmptyValues);
    }
    if !(alpha > 0.0) {
        return Err(OperatorError::Temperature(alpha));
    }
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if alpha.is_infinite() {
        return Ok(max);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for &x in values {
        let w = (alpha * (x - max)).exp();
        if w >= SMAX_FLUSH {
            num += w * x;
            den += w;
        }
    }
    Ok(num / den)
}

fn aggregate(values: &[f64], weights: &[f64], mode: Aggregation, alpha: f64) -> f64 {
    match mode {
        Aggregation::Expectation => values.iter().zip(weights).map(|(v, w)| v * w).sum(),
        Aggregation::Max => values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Smax => smax(values, alpha).expect("validated temperature"),
    }
}

/// Gated `n`-step values `[policy][depth]` for one configuration.
fn gated_branches(mdp: &TabularMdp, cfg: &HighwayConfig, q: &QTable) -> Vec<Vec<QTable>> {
    let bq = bellman_optimality(mdp, q);
    let depths = cfg.lookahead.depths();
    let deepest = match cfg.gate {
        Some(g) if g > 0 => cfg.lookahead.max_depth().max(g),
        _ => cfg.lookahead.max_depth(),
    };
    cfg.policy_set
        .iter()
        .map(|pi| {
            let chain = chain_from(mdp, pi, &bq, deepest);
            depths
                .iter()
                .map(|&n| {
                    let long = &chain[n - 1];
                    match cfg.gate {
                        None => long.clone(),
                        Some(0) => {
                            let mut g = long.zip_with(q, f64::max);
                            for s in (0..mdp.num_states()).filter(|&s| mdp.is_terminal(s)) {
                                g.row_mut(s).fill(0.0);
                            }
                            g
                        }
                        Some(t) => long.zip_with(&chain[t - 1], f64::max),
                    }
                })
                .collect()
        })
        .collect()
}

/// Applies an arbitrary gated multi-step operator described by `cfg`.
pub fn apply_highway(mdp: &TabularMdp, cfg: &HighwayConfig, q: &QTable) -> Result<QTable, OperatorError> {
    check_q(mdp, q)?;
    cfg.validate()?;
    for pi in cfg.policy_set.iter() {
        check_policy(mdp, pi)?;
    }
    let branches = gated_branches(mdp, cfg, q);
    let np = branches.len();
    let nd = cfg.lookahead.depths().len();
    let mut per_policy = vec![0.0; np];
    let mut per_depth = vec![0.0; nd];
    Ok(QTable::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| {
        for (p, row) in branches.iter().enumerate() {
            for (d, table) in row.iter().enumerate() {
                per_depth[d] = table.get(s, a);
            }
            per_policy[p] = aggregate(&per_depth, cfg.lookahead.selection(), cfg.depth_aggregation, cfg.temperature);
        }
        aggregate(&per_policy, cfg.policy_set.selection(), cfg.policy_aggregation, cfg.temperature)
    }))
}

fn require(cond: bool, what: &str) -> Result<(), OperatorError> {
    if cond {
        Ok(())
    } else {
        Err(OperatorError::Precondition(what.into()))
    }
}

fn require_expectation(cfg: &HighwayConfig) -> Result<(), OperatorError> {
    require(
        cfg.policy_aggregation == Aggregation::Expectation && cfg.depth_aggregation == Aggregation::Expectation,
        "aggregations must be expectation",
    )
}

/// Multi-step optimality backup `E_{π,n} (B^π)^{n−1} B q` (no gate).
pub fn multistep_bo(mdp: &TabularMdp, cfg: &HighwayConfig, q: &QTable) -> Result<QTable, OperatorError> {
    require_expectation(cfg)?;
    require(cfg.gate.is_none(), "multi-step backup takes no gate")?;
    apply_highway(mdp, cfg, q)
}

/// Highway generalized operator `E_{π,n} max_{n' ∈ {1,n}} (B^π)^{n'−1} B q`.
pub fn highway_generalized(mdp: &TabularMdp, cfg: &HighwayConfig, q: &QTable) -> Result<QTable, OperatorError> {
    require_expectation(cfg)?;
    require(cfg.gate == Some(1), "highway gate threshold must be 1")?;
    apply_highway(mdp, cfg, q)
}

/// Highway optimality operator `max_π max_n max_{n' ∈ {1,n}} (B^π)^{n'−1} B q`.
pub fn highway_optimality(
    mdp: &TabularMdp,
    policy_set: &PolicySet,
    lookahead: &LookaheadSet,
    q: &QTable,
) -> Result<QTable, OperatorError> {
    apply_highway(mdp, &HighwayConfig::optimality(policy_set.clone(), lookahead.clone()), q)
}

/// Highway softmax operator `smax_π smax_n max_{n' ∈ {1,n}} (B^π)^{n'−1} B q`.
pub fn highway_softmax(mdp: &TabularMdp, cfg: &HighwayConfig, q: &QTable) -> Result<QTable, OperatorError> {
    require(
        cfg.policy_aggregation == Aggregation::Smax && cfg.depth_aggregation == Aggregation::Smax,
        "aggregations must be smax",
    )?;
    require(cfg.gate == Some(1), "highway gate threshold must be 1")?;
    apply_highway(mdp, cfg, q)
}

/// Gate variants with threshold `n₁ ≠ 1`; `n₁ = 0` compares against `q`.
pub fn broken_gate_variant(mdp: &TabularMdp, cfg: &HighwayConfig, q: &QTable) -> Result<QTable, OperatorError> {
    require_expectation(cfg)?;
    match cfg.gate {
        Some(1) => {
            Err(OperatorError::Precondition("threshold 1 is the highway operator; use highway_generalized".into()))
        }
        Some(_) => apply_highway(mdp, cfg, q),
        None => Err(OperatorError::Precondition("gate threshold required".into())),
    }
}

/// Depth chosen by the highway gate `argmax_{n' ∈ {1, n}}` at `(s, a)` for
/// each policy in the set; ties go to `n`.
pub fn gate_selection(
    mdp: &TabularMdp,
    policy_set: &PolicySet,
    n: usize,
    q: &QTable,
    s: usize,
    a: usize,
) -> Result<Vec<usize>, OperatorError> {
    check_q(mdp, q)?;
    if n == 0 {
        return Err(OperatorError::InvalidDepth(0));
    }
    let bq = bellman_optimality(mdp, q);
    policy_set
        .iter()
        .map(|pi| {
            check_policy(mdp, pi)?;
            let chain = chain_from(mdp, pi, &bq, n);
            Ok(if chain[n - 1].get(s, a) >= chain[0].get(s, a) { n } else { 1 })
        })
        .collect()
}

/// `d(s,a) = |q_after(s,a) − q_star(s,a)|`.
pub fn distance_pointwise(q_after: &QTable, q_star: &QTable) -> Result<QTable, OperatorError> {
    if !q_after.same_shape(q_star) {
        return Err(OperatorError::Shape("distance between tables of different shape".into()));
    }
    Ok(q_after.zip_with(q_star, |a, b| (a - b).abs()))
}

/// `D = max_{s,a} d(s,a)`.
pub fn distance_sup(q_after: &QTable, q_star: &QTable) -> Result<f64, OperatorError> {
    Ok(distance_pointwise(q_after, q_star)?.sup_norm())
}
