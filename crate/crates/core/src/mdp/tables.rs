use serde::{Deserialize, Serialize};

use super::MdpError;

/// Dense state-action value table, row-major over `(state, action)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    num_states: usize,
    num_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(num_states: usize, num_actions: usize) -> Self {
        Self::filled(num_states, num_actions, 0.0)
    }

    pub fn filled(num_states: usize, num_actions: usize, value: f64) -> Self {
        Self { num_states, num_actions, values: vec![value; num_states * num_actions] }
    }

    pub fn from_values(num_states: usize, num_actions: usize, values: Vec<f64>) -> Result<Self, MdpError> {
        if values.len() != num_states * num_actions {
            return Err(MdpError::Shape { expected: (num_states, num_actions), found: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MdpError::NonFinite { state: i / num_actions.max(1), action: i % num_actions.max(1) });
        }
        Ok(Self { num_states, num_actions, values })
    }

    /// Builds a table by evaluating `f(state, action)` for every cell.
    pub fn from_fn(num_states: usize, num_actions: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(num_states * num_actions);
        for s in 0..num_states {
            for a in 0..num_actions {
                values.push(f(s, a));
            }
        }
        Self { num_states, num_actions, values }
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
    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.num_actions + a]
    }

    #[inline]
    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.num_actions + a] = v;
    }

    #[inline]
    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    #[inline]
    pub fn row_mut(&mut self, s: usize) -> &mut [f64] {
        &mut self.values[s * self.num_actions..(s + 1) * self.num_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// `max_a Q(s, a)`.
    pub fn max_row(&self, s: usize) -> f64 {
        self.row(s).iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Greedy action of row `s`, lowest index on ties.
    pub fn argmax_row(&self, s: usize) -> usize {
        argmax(self.row(s))
    }

    pub fn state_values(&self) -> VTable {
        VTable::from_vec((0..self.num_states).map(|s| self.max_row(s)).collect())
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn same_shape(&self, other: &QTable) -> bool {
        self.num_states == other.num_states && self.num_actions == other.num_actions
    }

    /// `‖self − other‖∞`. Panics on shape mismatch.
    pub fn sup_distance(&self, other: &QTable) -> f64 {
        assert!(self.same_shape(other), "QTable shape mismatch");
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> QTable {
        QTable {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_with(&self, other: &QTable, f: impl Fn(f64, f64) -> f64) -> QTable {
        assert!(self.same_shape(other), "QTable shape mismatch");
        QTable {
            num_states: self.num_states,
            num_actions: self.num_actions,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// True when `self ≤ other + tol` in every cell.
    pub fn le_within(&self, other: &QTable, tol: f64) -> bool {
        self.same_shape(other) && self.values.iter().zip(&other.values).all(|(a, b)| *a <= *b + tol)
    }
}

/// Dense state value table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VTable {
    values: Vec<f64>,
}

impl VTable {
    pub fn zeros(num_states: usize) -> Self {
        Self { values: vec![0.0; num_states] }
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, s: usize) -> f64 {
        self.values[s]
    }

    #[inline]
    pub fn set(&mut self, s: usize, v: f64) {
        self.values[s] = v;
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn sup_distance(&self, other: &VTable) -> f64 {
        assert_eq!(self.len(), other.len(), "VTable length mismatch");
        self.values.iter().zip(&other.values).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Index of the largest entry, lowest index on ties.
pub fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax(&[1.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[5.0, 5.0]), 0);
        assert_eq!(argmax(&[-1.0, 2.0, 2.0]), 1);
    }

    #[test]
    fn rejects_non_finite_entries() {
        let err = QTable::from_values(1, 2, vec![0.0, f64::NAN]).unwrap_err();
        assert!(matches!(err, MdpError::NonFinite { state: 0, action: 1 }));
        assert!(QTable::from_values(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn sup_distance_and_order() {
        let a = QTable::from_values(1, 3, vec![1.0, 2.0, 3.0]).unwrap();
        let b = a.map(|v| v + 0.5);
        assert_eq!(a.sup_distance(&b), 0.5);
        assert!(a.le_within(&b, 0.0));
        assert!(!b.le_within(&a, 0.1));
        assert_eq!(b.state_values().values(), &[3.5]);
    }
}
