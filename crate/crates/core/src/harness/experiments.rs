//! One runner per experiment kind. Each splits its work into isolated
//! cells; the caller executes them in parallel and merges by sort key.

use rand::Rng;

use super::config::{
    AgentName, EnvSpec, ExperimentConfig, ExperimentKind, OperatorName, OperatorSpec, PolicySetChoice, ToyTask,
};
use super::rows::{Metric, ResultRow};
use super::{properties, HarnessError};
use crate::algorithms::{
    highway_q_learning, highway_value_iteration, monte_carlo_agent, n_step_q_agent, policy_iteration, q_lambda_agent,
    sarsa_lambda_agent, value_iteration, LearningLog,
};
use crate::baselines::retrace_weight_profile;
use crate::envs::{
    build_choice, build_multiroom, build_threefork, build_traceback, random_mdp, ChoiceSpec, MdpEnv, MultiRoomSpec,
    RandomMdpSpec, ThreeFork, ThreeForkSpec, TraceBackSpec,
};
use crate::mdp::{
    epsilon_greedy, greedy_policy, load_mdp, q_pi_oracle, q_star_oracle, PolicySet, PolicySpec, QTable, TabularMdp,
};
use crate::operators::{
    apply_highway, bellman_optimality, broken_gate_variant, fixed_point, gate_selection, highway_generalized,
    highway_softmax, multistep_bo, HighwayConfig, LookaheadSet, OperatorError,
};
use crate::seed;

pub(crate) type CellResult = Result<Vec<ResultRow>, HarnessError>;

/// An isolated unit of work with its merge key.
pub(crate) struct Cell<'a> {
    pub key: String,
    pub run: Box<dyn Fn() -> CellResult + Send + Sync + 'a>,
}

fn cell<'a>(key: String, run: impl Fn() -> CellResult + Send + Sync + 'a) -> Cell<'a> {
    Cell { key, run: Box::new(run) }
}

/// Builds a row for `config`; the caller fills in the rest.
#[derive(Clone)]
struct RowBase {
    experiment: String,
    env: String,
    algorithm: String,
    seed: u64,
}

impl RowBase {
    fn row(&self, metric: Metric, x: f64, y: f64, flag: bool) -> ResultRow {
        ResultRow {
            experiment: self.experiment.clone(),
            env: self.env.clone(),
            algorithm: self.algorithm.clone(),
            seed: self.seed,
            metric,
            x,
            y,
            flag,
        }
    }
}

pub(crate) fn cells(config: &ExperimentConfig) -> Result<Vec<Cell<'_>>, HarnessError> {
    match config.kind {
        ExperimentKind::FixedPoint => operator_cells(config, OperatorRun::FixedPoint),
        ExperimentKind::ConvergenceIters => operator_cells(config, OperatorRun::Convergence),
        ExperimentKind::GateTrace => operator_cells(config, OperatorRun::GateTrace),
        ExperimentKind::Multiroom => multiroom_cells(config),
        ExperimentKind::ToyTasks => toy_cells(config),
        ExperimentKind::RetraceProfile => retrace_cells(config),
        ExperimentKind::PropertySuite => properties::cells(config),
    }
}

/// A model with its start state and, for ThreeFork, the fork policies.
pub(crate) struct LoadedModel {
    pub mdp: TabularMdp,
    pub start: usize,
    pub fork: Option<ThreeFork>,
}

pub(crate) fn load_model(env: &EnvSpec) -> Result<LoadedModel, HarnessError> {
    match env {
        EnvSpec::ThreeFork => {
            let tf = build_threefork(&ThreeForkSpec::default())?;
            Ok(LoadedModel { mdp: tf.mdp.clone(), start: tf.start, fork: Some(tf) })
        }
        EnvSpec::File { path } => Ok(LoadedModel { mdp: load_mdp(path)?, start: 0, fork: None }),
        _ => Err(HarnessError::Validation { path: "env.name".into(), message: "not a single model".into() }),
    }
}

/// Named policies of a set choice.
fn policy_set(model: &LoadedModel, choice: PolicySetChoice) -> Result<(PolicySet, Vec<&'static str>), HarnessError> {
    let (ns, na) = (model.mdp.num_states(), model.mdp.num_actions());
    let fork = || {
        model.fork.as_ref().ok_or_else(|| HarnessError::Validation {
            path: "operator.policy_sets".into(),
            message: format!("{} needs env three_fork", choice.id()),
        })
    };
    let (pols, names) = match choice {
        PolicySetChoice::AllForks => (fork()?.policies(), vec!["blue", "orange", "red"]),
        PolicySetChoice::Blue => (vec![fork()?.blue.clone()], vec!["blue"]),
        PolicySetChoice::Orange => (vec![fork()?.orange.clone()], vec!["orange"]),
        PolicySetChoice::Red => (vec![fork()?.red.clone()], vec!["red"]),
        PolicySetChoice::Uniform => (vec![PolicySpec::uniform(ns, na)], vec!["uniform"]),
    };
    Ok((PolicySet::uniform(pols)?, names))
}

/// Operator of the given name at depth `n`.
pub(crate) fn operator_config(
    name: OperatorName,
    set: PolicySet,
    n: usize,
    spec: &OperatorSpec,
) -> Result<HighwayConfig, OperatorError> {
    let la = LookaheadSet::single(n)?;
    Ok(match name {
        OperatorName::BellmanOptimality | OperatorName::HighwayGeneralized => HighwayConfig::generalized(set, la),
        OperatorName::MultistepBo => HighwayConfig::multistep(set, la),
        OperatorName::HighwayOptimality => HighwayConfig::optimality(set, la),
        OperatorName::HighwaySoftmax => HighwayConfig::softmax(set, la, spec.temperature),
        OperatorName::BrokenGate => HighwayConfig::broken_gate(set, la, spec.gate_threshold.unwrap_or(0)),
    })
}

pub(crate) fn apply_named(
    mdp: &TabularMdp,
    name: OperatorName,
    cfg: &HighwayConfig,
    q: &QTable,
) -> Result<QTable, OperatorError> {
    match name {
        OperatorName::BellmanOptimality => Ok(bellman_optimality(mdp, q)),
        OperatorName::MultistepBo => multistep_bo(mdp, cfg, q),
        OperatorName::HighwayGeneralized => highway_generalized(mdp, cfg, q),
        OperatorName::HighwayOptimality => apply_highway(mdp, cfg, q),
        OperatorName::HighwaySoftmax => highway_softmax(mdp, cfg, q),
        OperatorName::BrokenGate => broken_gate_variant(mdp, cfg, q),
    }
}

#[derive(Clone, Copy)]
enum OperatorRun {
    FixedPoint,
    Convergence,
    GateTrace,
}

fn operator_cells(config: &ExperimentConfig, what: OperatorRun) -> Result<Vec<Cell<'_>>, HarnessError> {
    let env = config.env()?;
    let spec = config.operator()?;
    let model = std::sync::Arc::new(load_model(env)?);
    let q_star = std::sync::Arc::new(q_star_oracle(&model.mdp, 1e-13)?);
    let mut out = Vec::new();
    for &name in &spec.names {
        let sets: &[PolicySetChoice] =
            if name == OperatorName::BellmanOptimality { &[PolicySetChoice::Uniform] } else { &spec.policy_sets };
        let depths: &[usize] = if name == OperatorName::BellmanOptimality { &[1] } else { &spec.depths };
        for &choice in sets {
            for &n in depths {
                let algorithm = if name == OperatorName::BellmanOptimality {
                    name.id().to_string()
                } else {
                    format!("{}/{}", name.id(), choice.id())
                };
                let base = RowBase { experiment: config.id.clone(), env: env.id(), algorithm, seed: 0 };
                let (model, q_star) = (model.clone(), q_star.clone());
                out.push(cell(format!("{}/{n}", base.algorithm), move || {
                    let (set, names) = policy_set(&model, choice)?;
                    let cfg = operator_config(name, set, n, spec)?;
                    match what {
                        OperatorRun::FixedPoint => fixed_point_rows(&base, &model, &q_star, name, &cfg, n, spec),
                        OperatorRun::Convergence => convergence_rows(&base, &model, &q_star, name, &cfg, n, spec),
                        OperatorRun::GateTrace => gate_rows(&base, &model, &cfg, &names, n, spec),
                    }
                }));
            }
        }
    }
    Ok(out)
}

fn fixed_point_rows(
    base: &RowBase,
    model: &LoadedModel,
    q_star: &QTable,
    name: OperatorName,
    cfg: &HighwayConfig,
    n: usize,
    spec: &OperatorSpec,
) -> CellResult {
    let mdp = &model.mdp;
    let zeros = QTable::zeros(mdp.num_states(), mdp.num_actions());
    let rep = fixed_point(|q| apply_named(mdp, name, cfg, q), zeros, spec.tol, spec.max_iters)?;
    let target = averaged_policy_values(mdp, &cfg.policy_set)?;
    let (x, ok, s) = (n as f64, rep.converged, model.start);
    let mut rows = vec![
        base.row(Metric::QStartUp, x, rep.q.get(s, 0), ok),
        base.row(Metric::GreedyStartAction, x, rep.q.argmax_row(s) as f64, ok),
        base.row(Metric::SupError, x, rep.q.sup_distance(q_star), ok),
        base.row(Metric::TargetError, x, rep.q.sup_distance(&target), ok),
        base.row(Metric::Iterations, x, rep.iterations as f64, ok),
        base.row(Metric::Residual, x, rep.residual, ok),
    ];
    if mdp.num_actions() > 1 {
        rows.push(base.row(Metric::QStartDown, x, rep.q.get(s, 1), ok));
    }
    if spec.emit_tables {
        let table = RowBase { algorithm: format!("{}/n={n}", base.algorithm), ..base.clone() };
        for (i, &v) in rep.q.values().iter().enumerate() {
            rows.push(table.row(Metric::QEntry, i as f64, v, ok));
        }
    }
    Ok(rows)
}

/// `Σ_π p̂(π) Q^π`.
pub(crate) fn averaged_policy_values(mdp: &TabularMdp, set: &PolicySet) -> Result<QTable, HarnessError> {
    let mut acc = QTable::zeros(mdp.num_states(), mdp.num_actions());
    for (pi, &w) in set.iter().zip(set.selection()) {
        let q = q_pi_oracle(mdp, pi, 1e-13)?;
        acc = acc.zip_with(&q, |a, b| a + w * b);
    }
    Ok(acc)
}

fn convergence_rows(
    base: &RowBase,
    model: &LoadedModel,
    q_star: &QTable,
    name: OperatorName,
    cfg: &HighwayConfig,
    n: usize,
    spec: &OperatorSpec,
) -> CellResult {
    let mdp = &model.mdp;
    let mut q = QTable::zeros(mdp.num_states(), mdp.num_actions());
    let mut rows = vec![base.row(Metric::ErrorCurve, 0.0, q.sup_distance(q_star), false)];
    let mut converged = false;
    let mut k = 0;
    while k < spec.max_iters && !converged {
        let next = apply_named(mdp, name, cfg, &q)?;
        converged = next.sup_distance(&q) <= spec.tol;
        q = next;
        k += 1;
        rows.push(base.row(Metric::ErrorCurve, k as f64, q.sup_distance(q_star), converged));
    }
    rows.push(base.row(Metric::Iterations, n as f64, k as f64, converged));
    Ok(rows)
}

/// Gate choice at `(start, 0)` for every policy, per iteration, up to and
/// including the first iteration after convergence.
fn gate_rows(
    base: &RowBase,
    model: &LoadedModel,
    cfg: &HighwayConfig,
    names: &[&str],
    n: usize,
    spec: &OperatorSpec,
) -> CellResult {
    let mdp = &model.mdp;
    let mut q = QTable::zeros(mdp.num_states(), mdp.num_actions());
    let mut rows = Vec::new();
    let mut converged = false;
    let mut k = 0;
    loop {
        let picks = gate_selection(mdp, &cfg.policy_set, n, &q, model.start, 0)?;
        for (pick, name) in picks.iter().zip(names) {
            let b = RowBase { algorithm: format!("{}/n={n}/{name}", base.algorithm), ..base.clone() };
            rows.push(b.row(Metric::GateChoice, k as f64, *pick as f64, converged));
        }
        if converged || k >= spec.max_iters {
            break;
        }
        let next = highway_generalized(mdp, cfg, &q)?;
        converged = next.sup_distance(&q) <= spec.tol;
        q = next;
        k += 1;
    }
    Ok(rows)
}

fn multiroom_cells(config: &ExperimentConfig) -> Result<Vec<Cell<'_>>, HarnessError> {
    let EnvSpec::MultiRoom { rooms, room_size } = config.env()? else { unreachable!("validated") };
    let planner = config.planner.clone().unwrap_or_default();
    let env_id = config.env()?.id();
    Ok(rooms
        .iter()
        .map(|&k| {
            let (planner, env_id) = (planner.clone(), env_id.clone());
            cell(format!("{k}"), move || {
                let world = build_multiroom(&MultiRoomSpec::new(k, *room_size))?;
                let v_star = q_star_oracle(&world.mdp, 1e-13)?.state_values();
                let runs = [
                    (
                        "value_iteration",
                        value_iteration(&world.mdp, planner.tolerance, planner.max_iters)?,
                        planner.tolerance,
                    ),
                    (
                        "policy_iteration",
                        policy_iteration(&world.mdp, planner.eval_depth, planner.tolerance, planner.max_iters)?,
                        planner.tolerance,
                    ),
                    (
                        "highway_value_iteration",
                        highway_value_iteration(&world.mdp, &planner.hvi)?,
                        planner.hvi.error_bound,
                    ),
                ];
                let x = k as f64;
                let mut rows = Vec::new();
                for (name, rep, eps) in runs {
                    let b =
                        RowBase { experiment: config.id.clone(), env: env_id.clone(), algorithm: name.into(), seed: 0 };
                    let err = rep.v.sup_distance(&v_star);
                    rows.push(b.row(Metric::Iterations, x, rep.iterations as f64, rep.converged));
                    rows.push(b.row(Metric::Samples, x, rep.samples as f64, rep.converged));
                    rows.push(b.row(Metric::ValueError, x, err, err <= 10.0 * eps));
                }
                Ok(rows)
            })
        })
        .collect())
}

pub(crate) fn build_toy(task: ToyTask, delay: usize) -> Result<MdpEnv, HarnessError> {
    Ok(match task {
        ToyTask::Choice => build_choice(&ChoiceSpec::new(delay))?,
        ToyTask::TraceBack => build_traceback(&TraceBackSpec::new(delay))?,
    })
}

fn toy_cells(config: &ExperimentConfig) -> Result<Vec<Cell<'_>>, HarnessError> {
    let EnvSpec::Toy { tasks, delays } = config.env()? else { unreachable!("validated") };
    let agents = config.agents.as_ref().expect("validated");
    let mut out = Vec::new();
    for &task in tasks {
        for &delay in delays {
            for &agent in &agents.names {
                for &s in &config.seeds {
                    out.push(cell(format!("{}/{delay}/{}/{s}", task.id(), agent.id()), move || {
                        let mut env = build_toy(task, delay)?;
                        let run_seed = seed::derive_seed(s, &config.id);
                        let log = run_agent(agent, &mut env, agents, run_seed)?;
                        let b = RowBase {
                            experiment: config.id.clone(),
                            env: task.id().into(),
                            algorithm: agent.id().into(),
                            seed: s,
                        };
                        let solved = log.solved().episodes();
                        let y = solved.map_or(f64::INFINITY, |e| e as f64);
                        Ok(vec![b.row(Metric::EpisodesToSolve, delay as f64, y, solved.is_some())])
                    }));
                }
            }
        }
    }
    Ok(out)
}

pub(crate) fn run_agent(
    agent: AgentName,
    env: &mut MdpEnv,
    spec: &super::config::AgentSpec,
    run_seed: u64,
) -> Result<LearningLog, HarnessError> {
    let p = &spec.classical;
    Ok(match agent {
        AgentName::HighwayQLearning => highway_q_learning(env, &spec.hql, run_seed)?,
        AgentName::QLambda => q_lambda_agent(env, p, run_seed)?,
        AgentName::SarsaLambda => sarsa_lambda_agent(env, p, run_seed)?,
        AgentName::MonteCarlo => monte_carlo_agent(env, p, run_seed)?,
        AgentName::NStepQ => n_step_q_agent(env, p, run_seed)?,
    })
}

/// Random MDPs of a `random` env spec drawn from `rng`.
pub(crate) fn random_models<R: Rng + ?Sized>(env: &EnvSpec, rng: &mut R) -> Result<Vec<TabularMdp>, HarnessError> {
    let EnvSpec::Random { count, states, actions, discount, branching, terminal_states } = env else {
        unreachable!("validated")
    };
    let spec = RandomMdpSpec::new(*states, *actions, *discount).branching(*branching).terminal_states(*terminal_states);
    (0..*count).map(|_| Ok(random_mdp(rng, &spec)?)).collect()
}

fn retrace_cells(config: &ExperimentConfig) -> Result<Vec<Cell<'_>>, HarnessError> {
    let env = config.env()?;
    let spec = config.retrace.as_ref().expect("validated");
    let mut out = Vec::new();
    for &s in &config.seeds {
        out.push(cell(format!("{s}"), move || {
            let mut rng = seed::stream(seed::derive_seed(s, &config.id), "retrace");
            let mut rows = Vec::new();
            for (i, mdp) in random_models(env, &mut rng)?.iter().enumerate() {
                let q_star = q_star_oracle(mdp, 1e-12)?;
                let target = greedy_policy(&q_star);
                let behavior = epsilon_greedy(&q_star, spec.epsilon)?;
                let traj = sample_trajectory(mdp, &behavior, spec.steps + 1, &mut rng);
                for &lambda in &spec.lambdas {
                    let profile = retrace_weight_profile(&target, &behavior, &traj, lambda)?;
                    let b = RowBase {
                        experiment: config.id.clone(),
                        env: format!("{}/{i}", env.id()),
                        algorithm: format!("retrace/lambda={lambda}"),
                        seed: s,
                    };
                    let mut prev = f64::INFINITY;
                    for (t, &w) in profile.iter().enumerate() {
                        rows.push(b.row(Metric::TraceWeight, t as f64, w, w <= prev));
                        prev = w;
                    }
                }
            }
            Ok(rows)
        }));
    }
    Ok(out)
}

/// Up to `len` `(s, a)` pairs under `pi` from a uniform non-terminal start.
fn sample_trajectory<R: Rng + ?Sized>(
    mdp: &TabularMdp,
    pi: &PolicySpec,
    len: usize,
    rng: &mut R,
) -> Vec<(usize, usize)> {
    let starts: Vec<usize> = (0..mdp.num_states()).filter(|&s| !mdp.is_terminal(s)).collect();
    let mut s = starts[rng.gen_range(0..starts.len())];
    let mut out = Vec::with_capacity(len);
    while out.len() < len && !mdp.is_terminal(s) {
        let a = draw(pi.row(s).iter().copied().enumerate(), rng);
        out.push((s, a));
        s = draw(mdp.successors(s, a).iter().copied(), rng);
    }
    out
}

fn draw<R: Rng + ?Sized>(items: impl Iterator<Item = (usize, f64)>, rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, p) in items {
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}
