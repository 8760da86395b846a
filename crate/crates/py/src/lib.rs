//! Python bindings for `highway-core`.
//!
//! Q-tables and policies cross the boundary as nested lists indexed
//! `[state][action]`.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use highway_core::algorithms::{highway_value_iteration, policy_iteration, value_iteration, HviParams, PlanningReport};
use highway_core::envs::{build_multiroom, build_threefork, random_mdp, MultiRoomSpec, RandomMdpSpec, ThreeForkSpec};
use highway_core::harness::{self, acceptance, ExperimentConfig};
use highway_core::mdp::{load_mdp, q_pi_oracle, q_star_oracle, save_mdp, PolicySet, PolicySpec, QTable, TabularMdp};
use highway_core::operators::{self, fixed_point, HighwayConfig, LookaheadSet};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_rows(q: &QTable) -> Vec<Vec<f64>> {
    (0..q.num_states()).map(|s| q.row(s).to_vec()).collect()
}

fn from_rows(rows: Vec<Vec<f64>>) -> PyResult<QTable> {
    let ns = rows.len();
    let na = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != na) {
        return Err(PyValueError::new_err("ragged table"));
    }
    QTable::from_values(ns, na, rows.into_iter().flatten().collect()).map_err(value_err)
}

fn policy(rows: Vec<Vec<f64>>) -> PyResult<PolicySpec> {
    let ns = rows.len();
    let na = rows.first().map_or(0, Vec::len);
    PolicySpec::new(ns, na, rows.into_iter().flatten().collect()).map_err(value_err)
}

/// Tabular MDP with expected rewards.
#[pyclass(name = "Mdp", module = "highway", frozen)]
struct PyMdp {
    inner: TabularMdp,
}

#[pymethods]
impl PyMdp {
    /// Builds an MDP from `(s, a, next, prob)` transitions, `(s, a, reward)`
    /// entries and terminal states.
    #[new]
    #[pyo3(signature = (num_states, num_actions, discount, transitions, rewards, terminals=Vec::new()))]
    fn new(
        num_states: usize,
        num_actions: usize,
        discount: f64,
        transitions: Vec<(usize, usize, usize, f64)>,
        rewards: Vec<(usize, usize, f64)>,
        terminals: Vec<usize>,
    ) -> PyResult<Self> {
        let mut b = TabularMdp::builder(num_states, num_actions, discount);
        for (s, a, next, p) in transitions {
            b.transition(s, a, next, p);
        }
        for (s, a, r) in rewards {
            b.reward(s, a, r);
        }
        for s in terminals {
            b.terminal(s);
        }
        Ok(Self { inner: b.build().map_err(value_err)? })
    }

    #[staticmethod]
    fn three_fork() -> PyResult<Self> {
        Ok(Self { inner: build_threefork(&ThreeForkSpec::default()).map_err(value_err)?.mdp })
    }

    #[staticmethod]
    fn multi_room(rooms: usize, room_size: usize) -> PyResult<Self> {
        Ok(Self { inner: build_multiroom(&MultiRoomSpec::new(rooms, room_size)).map_err(value_err)?.mdp })
    }

    #[staticmethod]
    #[pyo3(signature = (states, actions, discount, seed=0, terminal_states=1))]
    fn random(states: usize, actions: usize, discount: f64, seed: u64, terminal_states: usize) -> PyResult<Self> {
        let spec = RandomMdpSpec::new(states, actions, discount).terminal_states(terminal_states);
        let mut rng = highway_core::seed::stream(seed, "python");
        Ok(Self { inner: random_mdp(&mut rng, &spec).map_err(value_err)? })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(Self { inner: load_mdp(path).map_err(value_err)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        save_mdp(&self.inner, path).map_err(value_err)
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    #[getter]
    fn discount(&self) -> f64 {
        self.inner.discount()
    }

    #[pyo3(signature = (tol=1e-12))]
    fn q_star(&self, tol: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&q_star_oracle(&self.inner, tol).map_err(value_err)?))
    }

    #[pyo3(signature = (policy_rows, tol=1e-12))]
    fn q_pi(&self, policy_rows: Vec<Vec<f64>>, tol: f64) -> PyResult<Vec<Vec<f64>>> {
        Ok(to_rows(&q_pi_oracle(&self.inner, &policy(policy_rows)?, tol).map_err(value_err)?))
    }

    fn __repr__(&self) -> String {
        format!(
            "Mdp(num_states={}, num_actions={}, discount={})",
            self.inner.num_states(),
            self.inner.num_actions(),
            self.inner.discount()
        )
    }
}

/// The (blue, orange, red) behavior policies of the three-fork MDP.
#[pyfunction]
fn three_fork_policies() -> PyResult<Vec<Vec<Vec<f64>>>> {
    let tf = build_threefork(&ThreeForkSpec::default()).map_err(value_err)?;
    Ok(tf.policies().iter().map(|p| (0..p.num_states()).map(|s| p.row(s).to_vec()).collect()).collect())
}

fn dispatch(
    mdp: &TabularMdp,
    cfg: &HighwayConfig,
    gated: bool,
    q: &QTable,
) -> Result<QTable, operators::OperatorError> {
    if gated {
        operators::broken_gate_variant(mdp, cfg, q)
    } else {
        operators::apply_highway(mdp, cfg, q)
    }
}

fn highway_config(
    kind: &str,
    policies: Vec<Vec<Vec<f64>>>,
    depths: Vec<usize>,
    temperature: f64,
    gate: Option<usize>,
) -> PyResult<HighwayConfig> {
    let set = PolicySet::uniform(policies.into_iter().map(policy).collect::<PyResult<_>>()?).map_err(value_err)?;
    let la = LookaheadSet::uniform(depths).map_err(value_err)?;
    Ok(match (kind, gate) {
        ("multistep", None) => HighwayConfig::multistep(set, la),
        ("generalized", None) => HighwayConfig::generalized(set, la),
        ("generalized", Some(t)) => HighwayConfig::broken_gate(set, la, t),
        ("optimality", None) => HighwayConfig::optimality(set, la),
        ("softmax", None) => HighwayConfig::softmax(set, la, temperature),
        _ => return Err(PyValueError::new_err(format!("unsupported operator {kind:?} with gate {gate:?}"))),
    })
}

/// One application of `B q`.
#[pyfunction]
fn bellman_optimality(mdp: &PyMdp, q: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
    let q = from_rows(q)?;
    if q.num_states() != mdp.inner.num_states() || q.num_actions() != mdp.inner.num_actions() {
        return Err(PyValueError::new_err("table shape does not match the MDP"));
    }
    Ok(to_rows(&operators::bellman_optimality(&mdp.inner, &q)))
}

/// One application of a gated multi-step operator.
///
/// `kind` is `multistep`, `generalized`, `optimality` or `softmax`; `gate`
/// sets a non-default gate threshold for `generalized`.
#[pyfunction]
#[pyo3(signature = (mdp, q, policies, depths, kind="generalized", temperature=1.0, gate=None))]
fn apply_operator(
    mdp: &PyMdp,
    q: Vec<Vec<f64>>,
    policies: Vec<Vec<Vec<f64>>>,
    depths: Vec<usize>,
    kind: &str,
    temperature: f64,
    gate: Option<usize>,
) -> PyResult<Vec<Vec<f64>>> {
    let cfg = highway_config(kind, policies, depths, temperature, gate)?;
    let out = dispatch(&mdp.inner, &cfg, gate.is_some(), &from_rows(q)?).map_err(value_err)?;
    Ok(to_rows(&out))
}

/// Iterates an operator from `q ≡ 0`; returns a dict with `q`,
/// `iterations`, `residual` and `converged`.
#[pyfunction]
#[pyo3(signature = (mdp, policies, depths, kind="generalized", temperature=1.0, gate=None, tol=1e-10, max_iters=100_000))]
#[allow(clippy::too_many_arguments)]
fn solve_fixed_point(
    py: Python<'_>,
    mdp: &PyMdp,
    policies: Vec<Vec<Vec<f64>>>,
    depths: Vec<usize>,
    kind: &str,
    temperature: f64,
    gate: Option<usize>,
    tol: f64,
    max_iters: usize,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let cfg = highway_config(kind, policies, depths, temperature, gate)?;
    let m = &mdp.inner;
    let zeros = QTable::zeros(m.num_states(), m.num_actions());
    let rep = fixed_point(|q| dispatch(m, &cfg, gate.is_some(), q), zeros, tol, max_iters).map_err(value_err)?;
    let d = pyo3::types::PyDict::new(py);
    d.set_item("q", to_rows(&rep.q))?;
    d.set_item("iterations", rep.iterations)?;
    d.set_item("residual", rep.residual)?;
    d.set_item("converged", rep.converged)?;
    Ok(d.unbind())
}

fn planning_dict(py: Python<'_>, rep: PlanningReport) -> PyResult<Py<pyo3::types::PyDict>> {
    let d = pyo3::types::PyDict::new(py);
    d.set_item("v", rep.v.values().to_vec())?;
    d.set_item("iterations", rep.iterations)?;
    d.set_item("samples", rep.samples)?;
    d.set_item("residual", rep.residual)?;
    Ok(d.unbind())
}

/// Runs `vi`, `pi` or `hvi` with the multi-room defaults.
#[pyfunction]
#[pyo3(signature = (mdp, planner="hvi", tol=1e-10, eval_depth=5, max_iters=100_000))]
fn plan(
    py: Python<'_>,
    mdp: &PyMdp,
    planner: &str,
    tol: f64,
    eval_depth: usize,
    max_iters: usize,
) -> PyResult<Py<pyo3::types::PyDict>> {
    let m = &mdp.inner;
    let rep = match planner {
        "vi" => value_iteration(m, tol, max_iters),
        "pi" => policy_iteration(m, eval_depth, tol, max_iters),
        "hvi" => {
            highway_value_iteration(m, &HviParams { error_bound: tol, max_iters, ..HviParams::multiroom_defaults() })
        }
        other => return Err(PyValueError::new_err(format!("unknown planner {other:?}"))),
    }
    .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    planning_dict(py, rep)
}

/// Names of the shipped experiment presets.
#[pyfunction]
fn preset_names() -> Vec<&'static str> {
    harness::preset_names()
}

/// Runs a preset name or a JSON config string; returns the CSV text.
#[pyfunction]
fn run_experiment(py: Python<'_>, config: &str) -> PyResult<String> {
    let cfg = if config.trim_start().starts_with('{') {
        ExperimentConfig::from_json(config)
    } else {
        harness::preset(config)
    }
    .map_err(value_err)?;
    let rows = py
        .detach(|| harness::run(&cfg).and_then(|out| out.into_result()))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(harness::rows_to_string(&rows))
}

/// Runs one acceptance criterion; returns `(passed, line)`.
#[pyfunction]
fn check_criterion(py: Python<'_>, id: u8) -> PyResult<(bool, String)> {
    let outcome = py.detach(|| acceptance::check(id)).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((outcome.passed, outcome.line()))
}

#[pymodule]
fn highway(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyMdp>()?;
    m.add_function(wrap_pyfunction!(three_fork_policies, m)?)?;
    m.add_function(wrap_pyfunction!(bellman_optimality, m)?)?;
    m.add_function(wrap_pyfunction!(apply_operator, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fixed_point, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(preset_names, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(check_criterion, m)?)?;
    Ok(())
}
