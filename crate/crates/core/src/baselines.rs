//! Importance-sampling and trace-corrected evaluation operators.
//!
//! Both operators evaluate a target policy `π′` from behavior data in exact
//! expectation. Trajectory expectations with ratio products collapse into
//! backward recursions over ratio-weighted transition rows, which is how they
//! are computed here.

use serde::{Deserialize, Serialize};

use crate::mdp::{PolicySet, PolicySpec, QTable, TabularMdp};
use crate::operators::{check_policy, check_q, LookaheadSet, OperatorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceKind {
    /// `λ·min(1, π′/π)`
    Retrace,
    /// `λ`
    QLambda,
    /// `λ·π′/π`
    FullIs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceScheme {
    kind: TraceKind,
    lambda: f64,
}

impl TraceScheme {
    pub fn new(kind: TraceKind, lambda: f64) -> Result<Self, OperatorError> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(OperatorError::Precondition(format!("lambda {lambda} outside [0, 1]")));
        }
        Ok(Self { kind, lambda })
    }

    pub fn kind(&self) -> TraceKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Trace coefficient for an action with target probability `target` and
    /// behavior probability `behavior > 0`.
    pub fn trace(&self, target: f64, behavior: f64) -> f64 {
        let ratio = target / behavior;
        match self.kind {
            TraceKind::Retrace => self.lambda * ratio.min(1.0),
            TraceKind::QLambda => self.lambda,
            TraceKind::FullIs => self.lambda * ratio,
        }
    }
}

/// Output of [`trace_operator`].
#[derive(Debug, Clone, PartialEq)]
pub struct TraceResult {
    pub q: QTable,
    /// Upper bound on the dropped terms `t ≥ horizon`; infinite when `γ = 1`.
    pub tail_bound: f64,
}

/// Fails if `behavior` gives zero probability to an action `target` uses at
/// a non-terminal state.
fn check_absolute_continuity(
    mdp: &TabularMdp,
    target: &PolicySpec,
    behavior: &PolicySpec,
) -> Result<(), OperatorError> {
    for s in (0..mdp.num_states()).filter(|&s| !mdp.is_terminal(s)) {
        for a in 0..mdp.num_actions() {
            if target.prob(s, a) > 0.0 && behavior.prob(s, a) <= 0.0 {
                return Err(OperatorError::Precondition(format!(
                    "behavior policy has zero probability at (s={s}, a={a}) where the target does not"
                )));
            }
        }
    }
    Ok(())
}

/// `w(s,a) = π(a|s)·coef(s,a)` for the next-step expectation.
fn weighted_rows(mdp: &TabularMdp, behavior: &PolicySpec, coef: impl Fn(usize, usize) -> f64) -> QTable {
    QTable::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| {
        let b = behavior.prob(s, a);
        if b > 0.0 {
            b * coef(s, a)
        } else {
            0.0
        }
    })
}

/// `out(s,a) = base(s,a) + γ Σ P(s'|s,a) Σ w(s',a') x(s',a')`, zero on terminal rows.
fn weighted_backup(mdp: &TabularMdp, base: &QTable, w: &QTable, x: &QTable) -> QTable {
    let gamma = mdp.discount();
    let cont: Vec<f64> =
        (0..mdp.num_states()).map(|s| w.row(s).iter().zip(x.row(s)).map(|(wi, xi)| wi * xi).sum()).collect();
    QTable::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| {
        if mdp.is_terminal(s) {
            0.0
        } else {
            base.get(s, a) + gamma * mdp.expect_next(s, a, |n| cont[n])
        }
    })
}

fn rewards(mdp: &TabularMdp) -> QTable {
    QTable::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| mdp.reward(s, a))
}

/// Importance-sampling corrected multi-step evaluation backup.
///
/// For each behavior policy `π` and depth `n`, the expected `n`-step return
/// along `π`-trajectories with every reward and the bootstrap `q(s_n, a_n)`
/// weighted by the cumulative ratio `Π π′/π`; averaged with the selection
/// distributions.
pub fn multistep_be_is(
    mdp: &TabularMdp,
    target: &PolicySpec,
    policy_set: &PolicySet,
    lookahead: &LookaheadSet,
    q: &QTable,
) -> Result<QTable, OperatorError> {
    check_q(mdp, q)?;
    check_policy(mdp, target)?;
    if policy_set.is_empty() {
        return Err(OperatorError::EmptyPolicySet);
    }
    let r = rewards(mdp);
    let mut out = QTable::zeros(mdp.num_states(), mdp.num_actions());
    for (pi, &wp) in policy_set.iter().zip(policy_set.selection()) {
        check_policy(mdp, pi)?;
        check_absolute_continuity(mdp, target, pi)?;
        let w = weighted_rows(mdp, pi, |s, a| target.prob(s, a) / pi.prob(s, a));
        // g_k = r + γ P Σ π ρ g_{k−1}, g_0 = q.
        let mut g = q.clone();
        let mut k = 0;
        for (&n, &wn) in lookahead.depths().iter().zip(lookahead.selection()) {
            while k < n {
                g = weighted_backup(mdp, &r, &w, &g);
                k += 1;
            }
            for (o, v) in out.values_mut().iter_mut().zip(g.values()) {
                *o += wp * wn * v;
            }
        }
    }
    Ok(out)
}

/// Return-based trace operator truncated after `horizon` TD terms:
/// `q + E_π[Σ_{t<H} γ^t (Π_{1..t} ζ) δ_t]` with
/// `δ_t = r_t + γ E_{π′} q(s_{t+1}, ·) − q(s_t, a_t)`.
pub fn trace_operator(
    mdp: &TabularMdp,
    target: &PolicySpec,
    behavior: &PolicySpec,
    scheme: TraceScheme,
    horizon: usize,
    q: &QTable,
) -> Result<TraceResult, OperatorError> {
    check_q(mdp, q)?;
    check_policy(mdp, target)?;
    check_policy(mdp, behavior)?;
    if horizon == 0 {
        return Err(OperatorError::Precondition("horizon must be at least 1".into()));
    }
    if scheme.kind != TraceKind::QLambda {
        check_absolute_continuity(mdp, target, behavior)?;
    }
    let bq = crate::operators::bellman_expectation(mdp, target, q);
    let delta = bq.zip_with(q, |b, x| b - x);
    let w = weighted_rows(mdp, behavior, |s, a| scheme.trace(target.prob(s, a), behavior.prob(s, a)));
    // D_{H−1} = δ; D_k = δ + γ P Σ π ζ D_{k+1}.
    let mut d = delta.clone();
    for _ in 1..horizon {
        d = weighted_backup(mdp, &delta, &w, &d);
    }
    let mut out = q.zip_with(&d, |x, y| x + y);
    for s in (0..mdp.num_states()).filter(|&s| mdp.is_terminal(s)) {
        out.row_mut(s).fill(0.0);
    }
    let gamma = mdp.discount();
    let tail_bound =
        if gamma < 1.0 { gamma.powi(horizon as i32) * delta.sup_norm() / (1.0 - gamma) } else { f64::INFINITY };
    Ok(TraceResult { q: out, tail_bound })
}

/// Cumulative retrace weights `Π_{t'=1..t} λ·min(1, π′/π)` along a
/// trajectory of `(state, action)` pairs; entry 0 is the empty product.
pub fn retrace_weight_profile(
    target: &PolicySpec,
    behavior: &PolicySpec,
    trajectory: &[(usize, usize)],
    lambda: f64,
) -> Result<Vec<f64>, OperatorError> {
    let scheme = TraceScheme::new(TraceKind::Retrace, lambda)?;
    let mut out = Vec::with_capacity(trajectory.len());
    let mut acc = 1.0;
    for (t, &(s, a)) in trajectory.iter().enumerate() {
        if t > 0 {
            let b = behavior.prob(s, a);
            if b <= 0.0 {
                return Err(OperatorError::Precondition(format!("trajectory step {t} has zero behavior probability")));
            }
            acc *= scheme.trace(target.prob(s, a), b);
        }
        out.push(acc);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::fixtures::two_state;
    use crate::mdp::{epsilon_greedy, q_pi_oracle};

    #[test]
    fn lambda_zero_is_expectation_backup() {
        let mdp = two_state(0.9);
        let target = PolicySpec::uniform(2, 2);
        let behavior = PolicySpec::new(2, 2, vec![0.1, 0.9, 0.6, 0.4]).unwrap();
        let q = QTable::from_values(2, 2, vec![0.3, -1.0, 2.0, 5.0]).unwrap();
        for kind in [TraceKind::Retrace, TraceKind::QLambda, TraceKind::FullIs] {
            let out = trace_operator(&mdp, &target, &behavior, TraceScheme::new(kind, 0.0).unwrap(), 7, &q).unwrap();
            let expect = crate::operators::bellman_expectation(&mdp, &target, &q);
            assert!(out.q.sup_distance(&expect) < 1e-15);
        }
    }

    #[test]
    fn one_step_is_backup_by_hand() {
        // (B q)(s0, a1) = 1 + 0.5 (0.5·q(s0,a0) + 0.5·q(s0,a1)) under uniform π′.
        let mdp = two_state(0.5);
        let target = PolicySpec::uniform(2, 2);
        let ps = PolicySet::uniform(vec![PolicySpec::new(2, 2, vec![0.8, 0.2, 0.5, 0.5]).unwrap()]).unwrap();
        let q = QTable::from_values(2, 2, vec![2.0, 4.0, 7.0, 7.0]).unwrap();
        let out = multistep_be_is(&mdp, &target, &ps, &LookaheadSet::single(1).unwrap(), &q).unwrap();
        assert!((out.get(0, 1) - (1.0 + 0.5 * 3.0)).abs() < 1e-15);
        assert_eq!(out.get(0, 0), 0.0);
        assert_eq!(out.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn absolute_continuity_is_checked() {
        let mdp = two_state(0.9);
        let target = PolicySpec::uniform(2, 2);
        let behavior = PolicySpec::deterministic(&[0, 0], 2).unwrap();
        let q = QTable::zeros(2, 2);
        let ps = PolicySet::uniform(vec![behavior.clone()]).unwrap();
        assert!(multistep_be_is(&mdp, &target, &ps, &LookaheadSet::single(2).unwrap(), &q).is_err());
        let retrace = TraceScheme::new(TraceKind::Retrace, 1.0).unwrap();
        assert!(trace_operator(&mdp, &target, &behavior, retrace, 5, &q).is_err());
        assert!(TraceScheme::new(TraceKind::QLambda, 1.5).is_err());
        let ql = TraceScheme::new(TraceKind::QLambda, 1.0).unwrap();
        assert!(trace_operator(&mdp, &target, &behavior, ql, 0, &q).is_err());
    }

    #[test]
    fn fixed_point_on_two_state() {
        let mdp = two_state(0.9);
        let behavior = PolicySpec::uniform(2, 2);
        let target = epsilon_greedy(&QTable::from_values(2, 2, vec![0.0, 1.0, 0.0, 0.0]).unwrap(), 0.3).unwrap();
        let qp = q_pi_oracle(&mdp, &target, 1e-14).unwrap();
        let scheme = TraceScheme::new(TraceKind::Retrace, 0.7).unwrap();
        let out = trace_operator(&mdp, &target, &behavior, scheme, 400, &qp).unwrap();
        assert!(out.q.sup_distance(&qp) < 1e-10);
        assert!(out.tail_bound < 1e-10);
    }

    #[test]
    fn profile_examples() {
        let pi = PolicySpec::uniform(3, 2);
        let traj = [(0, 0), (1, 1), (2, 0), (1, 0)];
        assert_eq!(retrace_weight_profile(&pi, &pi, &traj, 1.0).unwrap(), vec![1.0; 4]);
        let halves = retrace_weight_profile(&pi, &pi, &traj, 0.5).unwrap();
        assert_eq!(halves, vec![1.0, 0.5, 0.25, 0.125]);
    }
}
