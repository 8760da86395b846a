use serde::{Deserialize, Serialize};

use crate::mdp::QTable;

/// Default stopping tolerance on `‖q_k − q_{k−1}‖∞`.
pub const DEFAULT_TOL: f64 = 1e-10;
pub const DEFAULT_MAX_ITERS: usize = 100_000;

/// A residual this many times the first one is treated as divergence.
const DIVERGENCE_FACTOR: f64 = 1e3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub q: QTable,
    /// Number of operator applications performed.
    pub iterations: usize,
    /// Final `‖q_k − q_{k−1}‖∞`.
    pub residual: f64,
    pub converged: bool,
}

/// Banach iteration `q_k = op(q_{k−1})` until the sup-norm change drops to
/// `tol` or `max_iters` applications have been made.
///
/// Divergence (non-finite values, or residual growing past 10³× the first
/// one) ends the run with `converged = false`; operator errors propagate.
pub fn fixed_point<F, E>(mut op: F, q0: QTable, tol: f64, max_iters: usize) -> Result<FixedPointReport, E>
where
    F: FnMut(&QTable) -> Result<QTable, E>,
{
    let mut q = q0;
    let mut first = None;
    let mut residual = f64::INFINITY;
    for k in 1..=max_iters {
        let next = op(&q)?;
        residual = next.sup_distance(&q);
        q = next;
        if residual.is_nan() || q.values().iter().any(|v| !v.is_finite()) {
            return Ok(FixedPointReport { q, iterations: k, residual: f64::INFINITY, converged: false });
        }
        if residual <= tol {
            return Ok(FixedPointReport { q, iterations: k, residual, converged: true });
        }
        let base = *first.get_or_insert(residual);
        if base > 0.0 && residual > DIVERGENCE_FACTOR * base {
            return Ok(FixedPointReport { q, iterations: k, residual, converged: false });
        }
    }
    Ok(FixedPointReport { q, iterations: max_iters, residual, converged: false })
}
