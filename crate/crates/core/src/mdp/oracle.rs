//! Ground-truth value functions by plain successive approximation.
//!
//! Deliberately self-contained: nothing here calls into `operators`, so the
//! oracles stay an independent check on the operator implementations.

use super::{MdpError, PolicySpec, QTable, TabularMdp, VTable};

const MAX_ORACLE_ITERS: usize = 2_000_000;

fn solve(mdp: &TabularMdp, tol: f64, mut next_value: impl FnMut(&QTable, usize) -> f64) -> Result<QTable, MdpError> {
    if !(tol > 0.0) {
        return Err(MdpError::Tolerance(tol));
    }
    if mdp.discount() >= 1.0 {
        mdp.episodic_check()?;
    }
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    let mut q = QTable::zeros(ns, na);
    let mut cont = vec![0.0; ns];
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ORACLE_ITERS {
        for (s, c) in cont.iter_mut().enumerate() {
            *c = if mdp.is_terminal(s) { 0.0 } else { next_value(&q, s) };
        }
        let mut next = QTable::zeros(ns, na);
        for s in 0..ns {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..na {
                let v = mdp.reward(s, a) + mdp.discount() * mdp.expect_next(s, a, |n| cont[n]);
                next.set(s, a, v);
            }
        }
        residual = next.sup_distance(&q);
        q = next;
        if residual <= tol {
            return Ok(q);
        }
    }
    Err(MdpError::OracleStalled { tol, iterations: MAX_ORACLE_ITERS, residual })
}

/// Optimal action values `Q*`, with `‖BQ − Q‖∞ ≤ tol` on return.
pub fn q_star_oracle(mdp: &TabularMdp, tol: f64) -> Result<QTable, MdpError> {
    solve(mdp, tol, |q, s| q.max_row(s))
}

/// Action values `Q^π` of a fixed policy, with `‖B^π Q − Q‖∞ ≤ tol`.
pub fn q_pi_oracle(mdp: &TabularMdp, pi: &PolicySpec, tol: f64) -> Result<QTable, MdpError> {
    if pi.num_states() != mdp.num_states() || pi.num_actions() != mdp.num_actions() {
        return Err(MdpError::Shape { expected: (mdp.num_states(), mdp.num_actions()), found: pi.probs().len() });
    }
    solve(mdp, tol, |q, s| pi.expected_value(q, s))
}

/// `V^π(s) = Σ_a π(a|s) Q^π(s, a)`.
pub fn v_pi_oracle(mdp: &TabularMdp, pi: &PolicySpec, tol: f64) -> Result<VTable, MdpError> {
    let q = q_pi_oracle(mdp, pi, tol)?;
    Ok(VTable::from_vec(
        (0..mdp.num_states()).map(|s| if mdp.is_terminal(s) { 0.0 } else { pi.expected_value(&q, s) }).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::fixtures::two_state;

    #[test]
    fn two_state_closed_form() {
        // Q*(s0,a1) = 1 + γ·Q*(s0,a1) ⇒ 1/(1−γ) = 2 for γ = 0.5.
        let q = q_star_oracle(&two_state(0.5), 1e-13).unwrap();
        assert!((q.get(0, 1) - 2.0).abs() < 1e-12);
        assert!(q.get(0, 0).abs() < 1e-12);
        assert_eq!(q.row(1), &[0.0, 0.0]);
    }

    #[test]
    fn two_state_uniform_policy_linear_system() {
        // V = 0.5·x0 + 0.5·x1, x0 = 0, x1 = 1 + 0.5·V ⇒ x1 = 1 + 0.25·x1 ⇒ x1 = 4/3.
        let mdp = two_state(0.5);
        let q = q_pi_oracle(&mdp, &PolicySpec::uniform(2, 2), 1e-14).unwrap();
        assert!((q.get(0, 1) - 4.0 / 3.0).abs() < 1e-12);
        assert!(q.get(0, 0).abs() < 1e-12);
        let v = v_pi_oracle(&mdp, &PolicySpec::uniform(2, 2), 1e-14).unwrap();
        assert!((v.get(0) - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_discount_returns_rewards() {
        let mdp = two_state(0.0);
        let q = q_star_oracle(&mdp, 1e-12).unwrap();
        assert_eq!(q.get(0, 1), 1.0);
        assert_eq!(q.get(0, 0), 0.0);
        let qp = q_pi_oracle(&mdp, &PolicySpec::uniform(2, 2), 1e-12).unwrap();
        assert_eq!(qp, q);
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(matches!(q_star_oracle(&two_state(0.5), 0.0), Err(MdpError::Tolerance(_))));
    }
}
