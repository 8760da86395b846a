use serde::{Deserialize, Serialize};

use super::OperatorError;
use crate::mdp::{check_distribution, PolicySet};

/// Nonempty sorted set of lookahead depths with a selection distribution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LookaheadSet {
    depths: Vec<usize>,
    selection: Vec<f64>,
}

impl LookaheadSet {
    pub fn new(depths: Vec<usize>, selection: Vec<f64>) -> Result<Self, OperatorError> {
        if depths.is_empty() {
            return Err(OperatorError::EmptyLookahead);
        }
        if let Some(&d) = depths.iter().find(|&&d| d == 0) {
            return Err(OperatorError::InvalidDepth(d));
        }
        if depths.windows(2).any(|w| w[0] >= w[1]) {
            return Err(OperatorError::Precondition("lookahead depths must be strictly increasing".into()));
        }
        check_distribution(&selection, depths.len())?;
        Ok(Self { depths, selection })
    }

    /// Uniform selection over the given depths (sorted and deduplicated).
    pub fn uniform(mut depths: Vec<usize>) -> Result<Self, OperatorError> {
        depths.sort_unstable();
        depths.dedup();
        let n = depths.len().max(1);
        Self::new(depths, vec![1.0 / n as f64; n])
    }

    pub fn single(depth: usize) -> Result<Self, OperatorError> {
        Self::new(vec![depth], vec![1.0])
    }

    /// `{lo, lo + 1, ..., hi}` with uniform selection.
    pub fn range(lo: usize, hi: usize) -> Result<Self, OperatorError> {
        Self::uniform((lo..=hi).collect())
    }

    pub fn depths(&self) -> &[usize] {
        &self.depths
    }

    pub fn selection(&self) -> &[f64] {
        &self.selection
    }

    pub fn max_depth(&self) -> usize {
        *self.depths.last().expect("nonempty")
    }
}

/// How values are combined across behavioral policies or across depths.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Weighted by the selection distribution.
    Expectation,
    Max,
    /// Softmax-weighted average at the configured temperature.
    Smax,
}

/// Full description of one gated multi-step operator.
///
/// `gate = None` disables the gate (plain multi-step backup). `Some(1)` is
/// the highway gate `max_{n' ∈ {1, n}}`; other thresholds give the broken
/// variants, with `Some(0)` comparing against the input table itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HighwayConfig {
    pub policy_set: PolicySet,
    pub lookahead: LookaheadSet,
    pub gate: Option<usize>,
    pub policy_aggregation: Aggregation,
    pub depth_aggregation: Aggregation,
    pub temperature: f64,
}

impl HighwayConfig {
    pub fn multistep(policy_set: PolicySet, lookahead: LookaheadSet) -> Self {
        Self::with(policy_set, lookahead, None, Aggregation::Expectation)
    }

    pub fn generalized(policy_set: PolicySet, lookahead: LookaheadSet) -> Self {
        Self::with(policy_set, lookahead, Some(1), Aggregation::Expectation)
    }

    pub fn optimality(policy_set: PolicySet, lookahead: LookaheadSet) -> Self {
        Self::with(policy_set, lookahead, Some(1), Aggregation::Max)
    }

    pub fn softmax(policy_set: PolicySet, lookahead: LookaheadSet, temperature: f64) -> Self {
        let mut cfg = Self::with(policy_set, lookahead, Some(1), Aggregation::Smax);
        cfg.temperature = temperature;
        cfg
    }

    /// Expectation aggregation with gate `max_{n' ∈ {threshold, n}}`.
    pub fn broken_gate(policy_set: PolicySet, lookahead: LookaheadSet, threshold: usize) -> Self {
        Self::with(policy_set, lookahead, Some(threshold), Aggregation::Expectation)
    }

    fn with(policy_set: PolicySet, lookahead: LookaheadSet, gate: Option<usize>, aggregation: Aggregation) -> Self {
        Self {
            policy_set,
            lookahead,
            gate,
            policy_aggregation: aggregation,
            depth_aggregation: aggregation,
            temperature: 1.0,
        }
    }

    pub(crate) fn validate(&self) -> Result<(), OperatorError> {
        if self.policy_set.is_empty() {
            return Err(OperatorError::EmptyPolicySet);
        }
        let uses_smax = self.policy_aggregation == Aggregation::Smax || self.depth_aggregation == Aggregation::Smax;
        if uses_smax && !(self.temperature > 0.0) {
            return Err(OperatorError::Temperature(self.temperature));
        }
        Ok(())
    }
}
