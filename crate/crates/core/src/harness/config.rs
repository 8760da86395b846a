use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::algorithms::{AgentParams, HqlParams, HviParams};
use crate::operators::{LookaheadSet, DEFAULT_MAX_ITERS, DEFAULT_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    FixedPoint,
    ConvergenceIters,
    GateTrace,
    Multiroom,
    ToyTasks,
    RetraceProfile,
    PropertySuite,
}

impl ExperimentKind {
    fn stochastic(self) -> bool {
        matches!(self, Self::ToyTasks | Self::RetraceProfile | Self::PropertySuite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToyTask {
    Choice,
    TraceBack,
}

impl ToyTask {
    pub fn id(self) -> &'static str {
        match self {
            Self::Choice => "choice",
            Self::TraceBack => "trace_back",
        }
    }
}

/// Environment description; `name` selects the variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvSpec {
    ThreeFork,
    /// MDP file in the JSON model format.
    File {
        path: PathBuf,
    },
    /// `count` random MDPs drawn per seed.
    Random {
        count: usize,
        states: usize,
        actions: usize,
        discount: f64,
        #[serde(default = "default_branching")]
        branching: usize,
        #[serde(default)]
        terminal_states: usize,
    },
    MultiRoom {
        rooms: Vec<usize>,
        room_size: usize,
    },
    Toy {
        tasks: Vec<ToyTask>,
        delays: Vec<usize>,
    },
}

fn default_branching() -> usize {
    3
}

impl EnvSpec {
    pub fn id(&self) -> String {
        match self {
            Self::ThreeFork => "three_fork".into(),
            Self::File { path } => path.file_stem().map_or_else(|| "file".into(), |s| s.to_string_lossy().into_owned()),
            Self::Random { states, actions, discount, .. } => format!("random_{states}x{actions}_g{discount}"),
            Self::MultiRoom { room_size, .. } => format!("multi_room_{room_size}"),
            Self::Toy { .. } => "toy".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OperatorName {
    BellmanOptimality,
    MultistepBo,
    HighwayGeneralized,
    HighwayOptimality,
    HighwaySoftmax,
    BrokenGate,
}

impl OperatorName {
    pub fn id(self) -> &'static str {
        match self {
            Self::BellmanOptimality => "bellman_optimality",
            Self::MultistepBo => "multistep_bo",
            Self::HighwayGeneralized => "highway_generalized",
            Self::HighwayOptimality => "highway_optimality",
            Self::HighwaySoftmax => "highway_softmax",
            Self::BrokenGate => "broken_gate",
        }
    }
}

/// Behavioral policy set used by an operator run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicySetChoice {
    /// ThreeFork's blue, orange and red policies with uniform selection.
    AllForks,
    Blue,
    Orange,
    Red,
    /// The uniform-random policy.
    Uniform,
}

impl PolicySetChoice {
    pub fn id(self) -> &'static str {
        match self {
            Self::AllForks => "all_forks",
            Self::Blue => "blue",
            Self::Orange => "orange",
            Self::Red => "red",
            Self::Uniform => "uniform",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub names: Vec<OperatorName>,
    /// One run per depth `n`, each with lookahead set `{n}`.
    pub depths: Vec<usize>,
    #[serde(default = "default_policy_sets")]
    pub policy_sets: Vec<PolicySetChoice>,
    #[serde(default)]
    pub gate_threshold: Option<usize>,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    /// Also emit every entry of each fixed point.
    #[serde(default)]
    pub emit_tables: bool,
}

fn default_policy_sets() -> Vec<PolicySetChoice> {
    vec![PolicySetChoice::AllForks]
}

fn default_temperature() -> f64 {
    1.0
}

fn default_tol() -> f64 {
    DEFAULT_TOL
}

fn default_max_iters() -> usize {
    DEFAULT_MAX_ITERS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgentName {
    HighwayQLearning,
    QLambda,
    SarsaLambda,
    MonteCarlo,
    NStepQ,
}

impl AgentName {
    pub fn id(self) -> &'static str {
        match self {
            Self::HighwayQLearning => "highway_q_learning",
            Self::QLambda => "q_lambda",
            Self::SarsaLambda => "sarsa_lambda",
            Self::MonteCarlo => "monte_carlo",
            Self::NStepQ => "n_step_q",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::HighwayQLearning, Self::QLambda, Self::SarsaLambda, Self::MonteCarlo, Self::NStepQ]
            .into_iter()
            .find(|a| a.id() == s || (s == "hql" && *a == Self::HighwayQLearning))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSpec {
    pub names: Vec<AgentName>,
    #[serde(default)]
    pub hql: HqlParams,
    #[serde(default)]
    pub classical: AgentParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerSpec {
    #[serde(default = "HviParams::multiroom_defaults")]
    pub hvi: HviParams,
    /// Stopping tolerance of value and policy iteration.
    #[serde(default = "default_tol")]
    pub tolerance: f64,
    #[serde(default = "default_eval_depth")]
    pub eval_depth: usize,
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
}

fn default_eval_depth() -> usize {
    5
}

impl Default for PlannerSpec {
    fn default() -> Self {
        Self {
            hvi: HviParams::multiroom_defaults(),
            tolerance: DEFAULT_TOL,
            eval_depth: default_eval_depth(),
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RetraceSpec {
    pub lambdas: Vec<f64>,
    /// Exploration rate of the ε-greedy behavior around the greedy target.
    pub epsilon: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropertySuite {
    Contraction,
    BrokenGates,
    Distances,
    Softmax,
    IsBaselines,
}

impl PropertySuite {
    pub const ALL: [PropertySuite; 5] =
        [Self::Contraction, Self::BrokenGates, Self::Distances, Self::Softmax, Self::IsBaselines];

    pub fn id(self) -> &'static str {
        match self {
            Self::Contraction => "contraction",
            Self::BrokenGates => "broken_gates",
            Self::Distances => "distances",
            Self::Softmax => "softmax",
            Self::IsBaselines => "is_baselines",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.id() == s)
    }
}

/// One experiment, serialized as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub id: String,
    pub kind: ExperimentKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub env: Option<EnvSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub operator: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agents: Option<AgentSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrace: Option<RetraceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub suite: Option<PropertySuite>,
    #[serde(default)]
    pub seeds: Vec<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Acceptance criterion judged by `--check`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub criterion: Option<u8>,
}

fn invalid(path: &str, msg: impl Into<String>) -> HarnessError {
    HarnessError::Validation { path: path.into(), message: msg.into() }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| invalid("$", e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.to_path_buf(), e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn env(&self) -> Result<&EnvSpec, HarnessError> {
        self.env.as_ref().ok_or_else(|| invalid("env", "required"))
    }

    pub fn operator(&self) -> Result<&OperatorSpec, HarnessError> {
        self.operator.as_ref().ok_or_else(|| invalid("operator", "required"))
    }

    /// Checks kind-specific required fields and value ranges.
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.id.is_empty() || self.id.contains([',', '"', '\n']) {
            return Err(invalid("id", "must be nonempty without commas, quotes or newlines"));
        }
        if self.kind.stochastic() && self.seeds.is_empty() {
            return Err(invalid("seeds", "must be nonempty"));
        }
        if let Some(env) = &self.env {
            validate_env(env)?;
        }
        if let Some(op) = &self.operator {
            validate_operator(op)?;
        }
        let env = self.env.as_ref();
        match self.kind {
            ExperimentKind::FixedPoint | ExperimentKind::ConvergenceIters | ExperimentKind::GateTrace => {
                match self.env()? {
                    EnvSpec::ThreeFork | EnvSpec::File { .. } => {}
                    _ => return Err(invalid("env.name", "must be three_fork or file")),
                }
                let op = self.operator()?;
                if !matches!(env, Some(EnvSpec::ThreeFork))
                    && op.policy_sets.iter().any(|p| *p != PolicySetChoice::Uniform)
                {
                    return Err(invalid("operator.policy_sets", "fork policies need env three_fork"));
                }
                if self.kind == ExperimentKind::GateTrace
                    && op.names.iter().any(|n| *n != OperatorName::HighwayGeneralized)
                {
                    return Err(invalid("operator.names", "gate traces use highway_generalized"));
                }
            }
            ExperimentKind::Multiroom => {
                if !matches!(self.env()?, EnvSpec::MultiRoom { .. }) {
                    return Err(invalid("env.name", "must be multi_room"));
                }
                let p = self.planner.clone().unwrap_or_default();
                if !(p.tolerance > 0.0) || p.eval_depth == 0 || p.max_iters == 0 {
                    return Err(invalid("planner", "tolerance, eval_depth and max_iters must be positive"));
                }
                let la = &p.hvi.lookahead;
                LookaheadSet::new(la.depths().to_vec(), la.selection().to_vec())
                    .map_err(|e| invalid("planner.hvi.lookahead", e.to_string()))?;
            }
            ExperimentKind::ToyTasks => {
                if !matches!(self.env()?, EnvSpec::Toy { .. }) {
                    return Err(invalid("env.name", "must be toy"));
                }
                let agents = self.agents.as_ref().ok_or_else(|| invalid("agents", "required"))?;
                if agents.names.is_empty() {
                    return Err(invalid("agents.names", "must be nonempty"));
                }
            }
            ExperimentKind::RetraceProfile => {
                if !matches!(self.env()?, EnvSpec::Random { .. }) {
                    return Err(invalid("env.name", "must be random"));
                }
                let r = self.retrace.as_ref().ok_or_else(|| invalid("retrace", "required"))?;
                if r.lambdas.is_empty() || r.lambdas.iter().any(|l| !(0.0..=1.0).contains(l)) {
                    return Err(invalid("retrace.lambdas", "must be nonempty values in [0, 1]"));
                }
                if !(0.0..=1.0).contains(&r.epsilon) || r.steps == 0 {
                    return Err(invalid("retrace", "epsilon must lie in [0, 1] and steps be positive"));
                }
            }
            ExperimentKind::PropertySuite => {
                if self.suite.is_none() {
                    return Err(invalid("suite", "required"));
                }
                if !matches!(self.env()?, EnvSpec::Random { .. }) {
                    return Err(invalid("env.name", "must be random"));
                }
            }
        }
        if let Some(c) = self.criterion {
            if !(1..=12).contains(&c) {
                return Err(invalid("criterion", "must be 1..=12"));
            }
        }
        Ok(())
    }
}

fn validate_env(env: &EnvSpec) -> Result<(), HarnessError> {
    match env {
        EnvSpec::Random { count, states, actions, discount, branching, terminal_states } => {
            if *count == 0 || *states == 0 || *actions == 0 || *branching == 0 {
                return Err(invalid("env", "count, states, actions and branching must be positive"));
            }
            if !(0.0..=1.0).contains(discount) {
                return Err(invalid("env.discount", "must lie in [0, 1]"));
            }
            if terminal_states >= states {
                return Err(invalid("env.terminal_states", "must be below states"));
            }
        }
        EnvSpec::MultiRoom { rooms, room_size } => {
            if rooms.is_empty() || rooms.contains(&0) {
                return Err(invalid("env.rooms", "must be nonempty positive counts"));
            }
            if *room_size < 2 {
                return Err(invalid("env.room_size", "must be at least 2"));
            }
        }
        EnvSpec::Toy { tasks, delays } => {
            if tasks.is_empty() {
                return Err(invalid("env.tasks", "must be nonempty"));
            }
            if delays.is_empty() || delays.iter().any(|&d| d < 2) {
                return Err(invalid("env.delays", "must be nonempty values of at least 2"));
            }
        }
        EnvSpec::ThreeFork | EnvSpec::File { .. } => {}
    }
    Ok(())
}

fn validate_operator(op: &OperatorSpec) -> Result<(), HarnessError> {
    if op.names.is_empty() {
        return Err(invalid("operator.names", "must be nonempty"));
    }
    if op.depths.is_empty() || op.depths.contains(&0) {
        return Err(invalid("operator.depths", "must be nonempty positive depths"));
    }
    if op.policy_sets.is_empty() {
        return Err(invalid("operator.policy_sets", "must be nonempty"));
    }
    if !(op.tol > 0.0) || op.max_iters == 0 {
        return Err(invalid("operator", "tol and max_iters must be positive"));
    }
    if !(op.temperature > 0.0 && op.temperature.is_finite()) {
        return Err(invalid("operator.temperature", "must be positive and finite"));
    }
    if op.names.contains(&OperatorName::BrokenGate) && matches!(op.gate_threshold, None | Some(1)) {
        return Err(invalid("operator.gate_threshold", "broken_gate needs a threshold other than 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn missing_fields_report_paths() {
        let err = ExperimentConfig::from_json(r#"{"id":"x","kind":"toy_tasks","seeds":[1]}"#).unwrap_err();
        assert!(err.to_string().contains("env"), "{err}");
        let err = ExperimentConfig::from_json(
            r#"{"id":"x","kind":"fixed_point","env":{"name":"three_fork"},
                "operator":{"names":["multistep_bo"],"depths":[]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("operator.depths"), "{err}");
        let err = ExperimentConfig::from_json(
            r#"{"id":"x","kind":"toy_tasks","env":{"name":"toy","tasks":["choice"],"delays":[6]},
                "agents":{"names":["q_lambda"]}}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("seeds"), "{err}");
    }

    #[test]
    fn json_round_trip() {
        let cfg = ExperimentConfig::from_json(
            r#"{"id":"t","kind":"toy_tasks","env":{"name":"toy","tasks":["choice","trace_back"],"delays":[6]},
                "agents":{"names":["highway_q_learning"]},"seeds":[0,1]}"#,
        )
        .unwrap();
        assert_eq!(ExperimentConfig::from_json(&cfg.to_json()).unwrap(), cfg);
    }
}
