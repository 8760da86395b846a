//! Randomized checks of operator properties over batches of random MDPs.
//!
//! Every suite emits, per check, a `violations` count, a `cases` count and
//! the largest observed error or excess.

use rand::Rng;

use super::config::{ExperimentConfig, PropertySuite};
use super::experiments::{random_models, Cell, CellResult};
use super::rows::{Metric, ResultRow};
use crate::baselines::{multistep_be_is, trace_operator, TraceKind, TraceScheme};
use crate::envs::random_policy;
use crate::mdp::{q_pi_oracle, q_star_oracle, PolicySet, QTable, TabularMdp};
use crate::operators::{
    apply_highway, bellman_expectation, bellman_optimality, broken_gate_variant, highway_generalized,
    highway_optimality, highway_softmax, multistep_bo, HighwayConfig, LookaheadSet, OperatorError,
};
use crate::seed;

/// Slack allowed on every inequality.
pub const SLACK: f64 = 1e-9;

const PAIRS_PER_MDP: usize = 10;
const POLICIES: usize = 3;
const MAX_DEPTH: usize = 5;

/// Tally for one named check.
struct Check {
    name: &'static str,
    violations: usize,
    cases: usize,
    max_error: f64,
}

impl Check {
    fn new(name: &'static str) -> Self {
        Self { name, violations: 0, cases: 0, max_error: 0.0 }
    }

    /// Records one case whose error must not exceed `bound`.
    fn record(&mut self, error: f64, bound: f64) {
        self.cases += 1;
        self.max_error = self.max_error.max(error);
        if !(error <= bound) {
            self.violations += 1;
        }
    }
}

pub(crate) fn cells(config: &ExperimentConfig) -> Result<Vec<Cell<'_>>, crate::harness::HarnessError> {
    let suite = config.suite.expect("validated");
    let env = config.env()?;
    Ok(config
        .seeds
        .iter()
        .map(|&s| Cell {
            key: format!("{s}"),
            run: Box::new(move || {
                let mut rng = seed::stream(seed::derive_seed(s, &config.id), suite.id());
                let models = random_models(env, &mut rng)?;
                let checks = run_suite(suite, &models, &mut rng)?;
                let mut rows = Vec::new();
                for c in checks {
                    let row = |metric, y, flag| ResultRow {
                        experiment: config.id.clone(),
                        env: env.id(),
                        algorithm: c.name.to_string(),
                        seed: s,
                        metric,
                        x: 0.0,
                        y,
                        flag,
                    };
                    let ok = c.violations == 0;
                    rows.push(row(Metric::Violations, c.violations as f64, ok));
                    rows.push(row(Metric::Cases, c.cases as f64, ok));
                    rows.push(row(Metric::MaxError, c.max_error, ok));
                }
                CellResult::Ok(rows)
            }),
        })
        .collect())
}

fn run_suite<R: Rng + ?Sized>(
    suite: PropertySuite,
    models: &[TabularMdp],
    rng: &mut R,
) -> Result<Vec<Check>, OperatorError> {
    match suite {
        PropertySuite::Contraction => contraction(models, rng),
        PropertySuite::BrokenGates => broken_gates(models, rng),
        PropertySuite::Distances => distances(models, rng),
        PropertySuite::Softmax => softmax(models, rng),
        PropertySuite::IsBaselines => is_baselines(models, rng),
    }
}

fn random_set<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R) -> Result<PolicySet, OperatorError> {
    let (ns, na) = (mdp.num_states(), mdp.num_actions());
    Ok(PolicySet::uniform((0..POLICIES).map(|_| random_policy(rng, ns, na)).collect())?)
}

/// Random nonempty subset of `1..=MAX_DEPTH` with uniform selection.
fn random_depths<R: Rng + ?Sized>(rng: &mut R) -> Result<LookaheadSet, OperatorError> {
    let mut depths: Vec<usize> = (1..=MAX_DEPTH).filter(|_| rng.gen_bool(0.5)).collect();
    if depths.is_empty() {
        depths.push(rng.gen_range(1..=MAX_DEPTH));
    }
    LookaheadSet::uniform(depths)
}

fn random_weights<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| x / total).collect()
}

fn random_q<R: Rng + ?Sized>(mdp: &TabularMdp, rng: &mut R, scale: f64) -> QTable {
    QTable::from_fn(mdp.num_states(), mdp.num_actions(), |s, _| {
        if mdp.is_terminal(s) {
            0.0
        } else {
            rng.gen_range(-scale..scale)
        }
    })
}

/// `Q* − |noise|` on non-terminal rows.
fn below_optimal<R: Rng + ?Sized>(mdp: &TabularMdp, q_star: &QTable, rng: &mut R, scale: f64) -> QTable {
    QTable::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| {
        if mdp.is_terminal(s) {
            0.0
        } else {
            q_star.get(s, a) - rng.gen_range(0.0..scale)
        }
    })
}

/// Largest `a − b` over entries.
fn max_excess(a: &QTable, b: &QTable) -> f64 {
    a.values().iter().zip(b.values()).map(|(x, y)| x - y).fold(f64::NEG_INFINITY, f64::max)
}

fn distance(a: &QTable, b: &QTable) -> QTable {
    a.zip_with(b, |x, y| (x - y).abs())
}

type Op<'a> = Box<dyn Fn(&QTable) -> Result<QTable, OperatorError> + 'a>;

fn contraction<R: Rng + ?Sized>(models: &[TabularMdp], rng: &mut R) -> Result<Vec<Check>, OperatorError> {
    let names = [
        "bellman_optimality",
        "bellman_expectation",
        "multistep_bo",
        "highway_generalized",
        "highway_optimality",
        "highway_softmax",
    ];
    let mut checks: Vec<Check> = names.iter().map(|n| Check::new(n)).collect();
    let mut equation = Check::new("highway_equation");
    for mdp in models {
        let set = random_set(mdp, rng)?;
        let la = random_depths(rng)?;
        let pi = set.get(0).expect("nonempty").clone();
        let gen = HighwayConfig::generalized(set.clone(), la.clone());
        let ms = HighwayConfig::multistep(set.clone(), la.clone());
        let soft = HighwayConfig::softmax(set.clone(), la.clone(), 1.0);
        let ops: Vec<Op> = vec![
            Box::new(|q| Ok(bellman_optimality(mdp, q))),
            Box::new(|q| Ok(bellman_expectation(mdp, &pi, q))),
            Box::new(|q| multistep_bo(mdp, &ms, q)),
            Box::new(|q| highway_generalized(mdp, &gen, q)),
            Box::new(|q| highway_optimality(mdp, &set, &la, q)),
            Box::new(|q| highway_softmax(mdp, &soft, q)),
        ];
        let gamma = mdp.discount();
        for _ in 0..PAIRS_PER_MDP {
            let (q1, q2) = (random_q(mdp, rng, 10.0), random_q(mdp, rng, 10.0));
            let d = q1.sup_distance(&q2);
            for (op, check) in ops.iter().zip(checks.iter_mut()) {
                let out = op(&q1)?.sup_distance(&op(&q2)?);
                check.record(out - gamma * d, SLACK);
            }
        }
        let q_star = q_star_oracle(mdp, 1e-13)?;
        equation.record(highway_generalized(mdp, &gen, &q_star)?.sup_distance(&q_star), SLACK);
    }
    checks.push(equation);
    Ok(checks)
}

/// The threshold-0 gate keeps any table that dominates every multi-step
/// return; `Q* + 1` is such a table when no state is terminal.
fn broken_gates<R: Rng + ?Sized>(models: &[TabularMdp], rng: &mut R) -> Result<Vec<Check>, OperatorError> {
    let mut keeps = Check::new("threshold0_fixes_q_star_plus_one");
    for mdp in models {
        let cfg = HighwayConfig::broken_gate(random_set(mdp, rng)?, random_depths(rng)?, 0);
        let q_star = q_star_oracle(mdp, 1e-13)?;
        let shifted = QTable::from_fn(mdp.num_states(), mdp.num_actions(), |s, a| {
            if mdp.is_terminal(s) {
                0.0
            } else {
                q_star.get(s, a) + 1.0
            }
        });
        let out = broken_gate_variant(mdp, &cfg, &shifted)?;
        keeps.record(out.sup_distance(&shifted), SLACK);
    }
    Ok(vec![keeps])
}

fn distances<R: Rng + ?Sized>(models: &[TabularMdp], rng: &mut R) -> Result<Vec<Check>, OperatorError> {
    const CLOSURE_ITERS: usize = 30;
    let mut pointwise = Check::new("d_highway_le_min_d_bellman_d_multistep");
    let mut max_agg = Check::new("d_max_aggregation_le_d_expectation");
    let mut point_mass = Check::new("point_mass_attains_max_aggregation");
    let mut sup = Check::new("sup_d_highway_le_sup_d_bellman");
    let mut closure = Check::new("iterates_stay_below_q_star");
    let mut changing = Check::new("changing_policy_sets_r_linear");
    for mdp in models {
        let q_star = q_star_oracle(mdp, 1e-13)?;
        let set = random_set(mdp, rng)?;
        let la = random_depths(rng)?;
        let gen = HighwayConfig::generalized(set.clone(), la.clone());
        let ms = HighwayConfig::multistep(set.clone(), la.clone());

        let q = below_optimal(mdp, &q_star, rng, 5.0);
        let dh = distance(&highway_generalized(mdp, &gen, &q)?, &q_star);
        let db = distance(&bellman_optimality(mdp, &q), &q_star);
        let dm = distance(&multistep_bo(mdp, &ms, &q)?, &q_star);
        pointwise.record(max_excess(&dh, &db.zip_with(&dm, f64::min)), SLACK);

        let plus = distance(&highway_optimality(mdp, &set, &la, &q)?, &q_star);
        for _ in 0..2 {
            let weighted = HighwayConfig::generalized(
                set.clone().with_selection(random_weights(rng, set.len()))?,
                LookaheadSet::new(la.depths().to_vec(), random_weights(rng, la.depths().len()))?,
            );
            let dg = distance(&apply_highway(mdp, &weighted, &q)?, &q_star);
            max_agg.record(max_excess(&plus, &dg), SLACK);
        }
        let mut best = QTable::filled(mdp.num_states(), mdp.num_actions(), f64::INFINITY);
        for i in 0..set.len() {
            let mut sel = vec![0.0; set.len()];
            sel[i] = 1.0;
            for (j, _) in la.depths().iter().enumerate() {
                let mut dsel = vec![0.0; la.depths().len()];
                dsel[j] = 1.0;
                let cfg = HighwayConfig::generalized(
                    set.clone().with_selection(sel.clone())?,
                    LookaheadSet::new(la.depths().to_vec(), dsel)?,
                );
                best = best.zip_with(&distance(&apply_highway(mdp, &cfg, &q)?, &q_star), f64::min);
            }
        }
        point_mass.record(best.sup_distance(&plus), 1e-12);

        let free = q_star.zip_with(&random_q(mdp, rng, 5.0), |a, b| a + b);
        let free =
            QTable::from_fn(
                mdp.num_states(),
                mdp.num_actions(),
                |s, a| {
                    if mdp.is_terminal(s) {
                        0.0
                    } else {
                        free.get(s, a)
                    }
                },
            );
        sup.record(
            highway_generalized(mdp, &gen, &free)?.sup_distance(&q_star)
                - bellman_optimality(mdp, &free).sup_distance(&q_star),
            SLACK,
        );

        for op in [0, 1] {
            let mut it = below_optimal(mdp, &q_star, rng, 5.0);
            let mut worst = f64::NEG_INFINITY;
            for _ in 0..CLOSURE_ITERS {
                it = if op == 0 { highway_generalized(mdp, &gen, &it)? } else { multistep_bo(mdp, &ms, &it)? };
                worst = worst.max(max_excess(&it, &q_star));
            }
            closure.record(worst, SLACK);
        }

        let mut it = random_q(mdp, rng, 5.0);
        let d0 = it.sup_distance(&q_star);
        let mut worst = f64::NEG_INFINITY;
        let mut bound = d0;
        for _ in 0..CLOSURE_ITERS {
            let fresh = random_set(mdp, rng)?;
            it = highway_optimality(mdp, &fresh, &random_depths(rng)?, &it)?;
            bound *= mdp.discount();
            worst = worst.max(it.sup_distance(&q_star) - bound);
        }
        changing.record(worst, SLACK);
    }
    Ok(vec![pointwise, max_agg, point_mass, sup, closure, changing])
}

/// Temperatures checked for the contraction toward `Q*`.
pub const SOFTMAX_TEMPERATURES: [f64; 3] = [0.01, 1.0, 100.0];
/// Temperature at which the softmax operator must match max aggregation.
pub const SOFTMAX_HARD_TEMPERATURE: f64 = 1e6;
pub const SOFTMAX_HARD_TOL: f64 = 1e-6;

fn softmax<R: Rng + ?Sized>(models: &[TabularMdp], rng: &mut R) -> Result<Vec<Check>, OperatorError> {
    let names = ["toward_q_star_alpha=0.01", "toward_q_star_alpha=1", "toward_q_star_alpha=100"];
    let mut checks: Vec<Check> = names.iter().map(|n| Check::new(n)).collect();
    let mut hard = Check::new("alpha=1e6_matches_optimality");
    for mdp in models {
        let q_star = q_star_oracle(mdp, 1e-13)?;
        let set = random_set(mdp, rng)?;
        let la = random_depths(rng)?;
        for _ in 0..PAIRS_PER_MDP {
            let q = random_q(mdp, rng, 10.0);
            let d = q.sup_distance(&q_star);
            for (&alpha, check) in SOFTMAX_TEMPERATURES.iter().zip(checks.iter_mut()) {
                let cfg = HighwayConfig::softmax(set.clone(), la.clone(), alpha);
                check.record(highway_softmax(mdp, &cfg, &q)?.sup_distance(&q_star) - mdp.discount() * d, SLACK);
            }
            let cfg = HighwayConfig::softmax(set.clone(), la.clone(), SOFTMAX_HARD_TEMPERATURE);
            let opt = highway_optimality(mdp, &set, &la, &q)?;
            hard.record(highway_softmax(mdp, &cfg, &q)?.sup_distance(&opt), SOFTMAX_HARD_TOL);
        }
    }
    checks.push(hard);
    Ok(checks)
}

pub const IS_TOL: f64 = 1e-8;
const TRACE_HORIZON: usize = 400;

fn is_baselines<R: Rng + ?Sized>(models: &[TabularMdp], rng: &mut R) -> Result<Vec<Check>, OperatorError> {
    let mut multistep = Check::new("multistep_is_keeps_q_pi");
    let mut traces: Vec<Check> =
        ["retrace_keeps_q_pi", "q_lambda_keeps_q_pi", "full_is_keeps_q_pi"].iter().map(|n| Check::new(n)).collect();
    let kinds = [TraceKind::Retrace, TraceKind::QLambda, TraceKind::FullIs];
    for mdp in models {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        let target = random_policy(rng, ns, na);
        let set = random_set(mdp, rng)?;
        let q_pi = q_pi_oracle(mdp, &target, 1e-13)?;
        let out = multistep_be_is(mdp, &target, &set, &random_depths(rng)?, &q_pi)?;
        multistep.record(out.sup_distance(&q_pi), IS_TOL);
        let behavior = set.get(0).expect("nonempty");
        for (kind, check) in kinds.iter().zip(traces.iter_mut()) {
            let scheme = TraceScheme::new(*kind, rng.gen_range(0.0..=1.0))?;
            let res = trace_operator(mdp, &target, behavior, scheme, TRACE_HORIZON, &q_pi)?;
            check.record(res.q.sup_distance(&q_pi), IS_TOL);
        }
    }
    let mut all = vec![multistep];
    all.extend(traces);
    Ok(all)
}
