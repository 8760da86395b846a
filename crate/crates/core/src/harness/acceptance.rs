//! Acceptance criteria: each one runs its shipped presets and judges the
//! resulting rows against pinned tolerances.

use std::collections::BTreeMap;

use super::rows::{Metric, ResultRow};
use super::{preset, run, HarnessError};
use crate::envs::ACTION_DOWN;

pub const UNDERESTIMATION_TOL: f64 = 1e-8;
pub const MONOTONICITY_TOL: f64 = 1e-9;
pub const DEPTH_LIMIT_TOL: f64 = 1e-6;
pub const HIGHWAY_EQUATION_TOL: f64 = 1e-8;
pub const BROKEN_GATE_TOL: f64 = 1e-9;
pub const RETRACE_FLOOR: f64 = 0.01;
pub const RETRACE_STEPS: f64 = 20.0;
/// Multiple of the planner's error bound allowed on the value error.
pub const PLANNER_ERROR_FACTOR: f64 = 10.0;
pub const TOY_SPEEDUP: f64 = 2.0;
pub const TOY_GROWTH: f64 = 2.0;

/// Averaged fork-policy value at `(S_A, ↗)`: `(9 + 3 − 9) / 3`.
pub const FORK_AVERAGE_START_UP: f64 = 1.0;

pub struct Criterion {
    pub id: u8,
    pub title: &'static str,
    pub presets: &'static [&'static str],
}

pub const CRITERIA: [Criterion; 12] = [
    Criterion { id: 1, title: "three-fork underestimation", presets: &["c01_underestimation"] },
    Criterion { id: 2, title: "depth monotonicity", presets: &["c02_depth_monotonicity"] },
    Criterion { id: 3, title: "depth limit", presets: &["c03_depth_limit"] },
    Criterion { id: 4, title: "highway equation", presets: &["c04_highway_equation"] },
    Criterion { id: 5, title: "contraction suite", presets: &["c05_contraction"] },
    Criterion { id: 6, title: "broken gates", presets: &["c06_broken_gate_random", "c06_broken_gate_three_fork"] },
    Criterion { id: 7, title: "distance bounds", presets: &["c07_distances"] },
    Criterion { id: 8, title: "softmax operator", presets: &["c08_softmax"] },
    Criterion { id: 9, title: "importance-sampling baselines", presets: &["c09_is_baselines", "c09_retrace_profile"] },
    Criterion { id: 10, title: "highway value iteration on multi-room", presets: &["c10_multiroom"] },
    Criterion { id: 11, title: "toy delayed-reward tasks", presets: &["c11_toy_tasks"] },
    Criterion { id: 12, title: "gate trace", presets: &["c12_gate_trace"] },
];

#[derive(Debug, Clone)]
pub struct Outcome {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    /// Failed clauses, or a short summary when passed.
    pub detail: String,
    pub rows: Vec<ResultRow>,
}

impl Outcome {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} ({}): {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.title,
            self.detail
        )
    }
}

pub fn criterion(id: u8) -> Option<&'static Criterion> {
    CRITERIA.iter().find(|c| c.id == id)
}

/// Runs the presets of criterion `id` and judges them.
pub fn check(id: u8) -> Result<Outcome, HarnessError> {
    let c = criterion(id)
        .ok_or_else(|| HarnessError::Validation { path: "criterion".into(), message: format!("no criterion {id}") })?;
    let mut rows = Vec::new();
    for name in c.presets {
        rows.extend(run(&preset(name)?)?.into_result()?);
    }
    Ok(judge(id, rows))
}

/// Judges rows produced by the presets of criterion `id`.
pub fn judge(id: u8, rows: Vec<ResultRow>) -> Outcome {
    let c = criterion(id).expect("known criterion");
    let v = View(&rows);
    let mut j = Judge::default();
    match id {
        1 => underestimation(&v, &mut j),
        2 => monotonicity(&v, &mut j),
        3 => depth_limit(&v, &mut j),
        4 => highway_equation(&v, &mut j),
        5 => property_suite(&v, &mut j, "c05_contraction", 50),
        6 => broken_gates(&v, &mut j),
        7 => property_suite(&v, &mut j, "c07_distances", 50),
        8 => property_suite(&v, &mut j, "c08_softmax", 50),
        9 => is_baselines(&v, &mut j),
        10 => multiroom(&v, &mut j),
        11 => toy_tasks(&v, &mut j),
        12 => gate_trace(&v, &mut j),
        _ => unreachable!(),
    }
    let passed = j.failures.is_empty();
    let detail = if passed { j.notes.join("; ") } else { j.failures.join("; ") };
    Outcome { id, title: c.title, passed, detail, rows }
}

#[derive(Default)]
struct Judge {
    failures: Vec<String>,
    notes: Vec<String>,
}

impl Judge {
    fn require(&mut self, ok: bool, msg: impl FnOnce() -> String) {
        if !ok {
            self.failures.push(msg());
        }
    }

    fn note(&mut self, msg: String) {
        self.notes.push(msg);
    }
}

struct View<'a>(&'a [ResultRow]);

impl<'a> View<'a> {
    fn select(&self, experiment: &str, algorithm: &str, metric: Metric) -> Vec<&'a ResultRow> {
        self.0.iter().filter(|r| r.experiment == experiment && r.algorithm == algorithm && r.metric == metric).collect()
    }

    /// `x → y` of a deterministic series.
    fn series(&self, experiment: &str, algorithm: &str, metric: Metric) -> BTreeMap<u64, &'a ResultRow> {
        self.select(experiment, algorithm, metric).into_iter().map(|r| (r.x as u64, r)).collect()
    }

    fn table(&self, experiment: &str, algorithm: &str) -> Vec<f64> {
        self.series(experiment, algorithm, Metric::QEntry).values().map(|r| r.y).collect()
    }
}

fn q_star_start_up(v: &View, experiment: &str, j: &mut Judge) -> Option<f64> {
    let r = v.series(experiment, "bellman_optimality", Metric::QStartUp);
    let q = r.get(&1).map(|r| r.y);
    j.require(q.is_some(), || format!("{experiment}: missing optimal reference row"));
    q
}

fn underestimation(v: &View, j: &mut Judge) {
    let e = "c01_underestimation";
    let Some(q_star) = q_star_start_up(v, e, j) else { return };
    let up = v.series(e, "multistep_bo/all_forks", Metric::QStartUp);
    let greedy = v.series(e, "multistep_bo/all_forks", Metric::GreedyStartAction);
    j.require(up.len() == 9, || format!("expected depths 2..=10, got {}", up.len()));
    let mut worst: f64 = f64::NEG_INFINITY;
    for (n, r) in &up {
        worst = worst.max(r.y);
        j.require(r.flag, || format!("n={n} did not converge"));
        j.require(r.y < q_star - UNDERESTIMATION_TOL, || format!("n={n}: {} not below Q* {q_star}", r.y));
        let g = greedy.get(n).map(|r| r.y as usize);
        j.require(g == Some(ACTION_DOWN), || format!("n={n}: greedy start action {g:?}"));
    }
    j.note(format!("Q*={q_star}, largest fixed-point value {worst}, greedy flips at every n"));
}

fn monotonicity(v: &View, j: &mut Judge) {
    let e = "c02_depth_monotonicity";
    let q_star = v.table(e, "bellman_optimality/n=1");
    j.require(!q_star.is_empty(), || "missing optimal table".into());
    for set in ["blue", "orange", "red"] {
        let t = |n: usize| v.table(e, &format!("multistep_bo/{set}/n={n}"));
        let chain = [t(8), t(4), t(2), q_star.clone()];
        for w in chain.windows(2) {
            j.require(w[0].len() == w[1].len() && !w[0].is_empty(), || format!("{set}: table missing"));
            let excess = w[0].iter().zip(&w[1]).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
            j.require(excess <= MONOTONICITY_TOL, || format!("{set}: order violated by {excess:e}"));
        }
    }
    j.note("Q8 <= Q4 <= Q2 <= Q* for blue, orange and red".into());
}

fn depth_limit(v: &View, j: &mut Judge) {
    let e = "c03_depth_limit";
    let err = v.series(e, "multistep_bo/all_forks", Metric::TargetError);
    let up = v.series(e, "multistep_bo/all_forks", Metric::QStartUp);
    match (err.get(&200), up.get(&200)) {
        (Some(err), Some(up)) => {
            j.require(err.flag, || "n=200 did not converge".into());
            j.require(err.y <= DEPTH_LIMIT_TOL, || format!("distance to averaged values {:e}", err.y));
            j.require((up.y - FORK_AVERAGE_START_UP).abs() <= DEPTH_LIMIT_TOL, || {
                format!("Q(S_A,up)={} but the averaged value is {FORK_AVERAGE_START_UP}", up.y)
            });
            j.note(format!("distance {:e}, Q(S_A,up)={}", err.y, up.y));
        }
        _ => j.require(false, || "missing n=200 rows".into()),
    }
}

fn highway_equation(v: &View, j: &mut Judge) {
    let err = v.series("c04_highway_equation", "highway_generalized/all_forks", Metric::SupError);
    j.require(err.len() == 10, || format!("expected depths 1..=10, got {}", err.len()));
    let mut worst: f64 = 0.0;
    for (n, r) in &err {
        worst = worst.max(r.y);
        j.require(r.flag && r.y <= HIGHWAY_EQUATION_TOL, || format!("n={n}: error {:e}", r.y));
    }
    j.note(format!("largest error {worst:e}"));
}

/// Zero violations in every check of a property suite, with at least
/// `min_cases` cases per check.
fn property_suite(v: &View, j: &mut Judge, experiment: &str, min_cases: usize) {
    let mut by_check: BTreeMap<&str, (f64, f64)> = BTreeMap::new();
    for r in v.0.iter().filter(|r| r.experiment == experiment) {
        let e = by_check.entry(r.algorithm.as_str()).or_default();
        match r.metric {
            Metric::Violations => e.0 += r.y,
            Metric::Cases => e.1 += r.y,
            _ => {}
        }
    }
    j.require(!by_check.is_empty(), || format!("{experiment}: no rows"));
    let mut total = 0.0;
    for (name, (violations, cases)) in &by_check {
        total += cases;
        j.require(*violations == 0.0, || format!("{name}: {violations} violations in {cases} cases"));
        j.require(*cases >= min_cases as f64, || format!("{name}: only {cases} cases"));
    }
    j.note(format!("{} checks, {total} cases, zero violations", by_check.len()));
}

fn broken_gates(v: &View, j: &mut Judge) {
    property_suite(v, j, "c06_broken_gate_random", 50);
    let e = "c06_broken_gate_three_fork";
    let Some(q_star) = q_star_start_up(v, e, j) else { return };
    let up = v.series(e, "broken_gate/all_forks", Metric::QStartUp);
    match up.get(&10) {
        Some(r) => {
            j.require(r.flag, || "threshold-3 variant did not converge".into());
            j.require(r.y < q_star - UNDERESTIMATION_TOL, || format!("threshold 3: {} not below Q* {q_star}", r.y));
            j.note(format!("threshold 3 fixed point {} < {q_star}", r.y));
        }
        None => j.require(false, || "missing threshold-3 row".into()),
    }
}

fn is_baselines(v: &View, j: &mut Judge) {
    property_suite(v, j, "c09_is_baselines", 20);
    let mut profiles: BTreeMap<(&str, u64), Vec<&ResultRow>> = BTreeMap::new();
    for r in v.select("c09_retrace_profile", "retrace/lambda=0.5", Metric::TraceWeight) {
        profiles.entry((r.env.as_str(), r.seed)).or_default().push(r);
    }
    j.require(!profiles.is_empty(), || "no retrace profiles".into());
    for ((env, seed), rows) in &profiles {
        j.require(rows.iter().all(|r| r.flag), || format!("{env} seed {seed}: weights increase"));
        let below = rows.iter().any(|r| r.x <= RETRACE_STEPS && r.y < RETRACE_FLOOR);
        j.require(below, || format!("{env} seed {seed}: weight stays above {RETRACE_FLOOR}"));
    }
    j.note(format!("{} retrace profiles non-increasing and below {RETRACE_FLOOR}", profiles.len()));
}

fn multiroom(v: &View, j: &mut Judge) {
    let e = "c10_multiroom";
    let vi = v.series(e, "value_iteration", Metric::Iterations);
    let hvi = v.series(e, "highway_value_iteration", Metric::Iterations);
    let err = v.series(e, "highway_value_iteration", Metric::ValueError);
    let samples = v.series(e, "highway_value_iteration", Metric::Samples);
    let vi_samples = v.series(e, "value_iteration", Metric::Samples);
    j.require(hvi.len() == 3 && vi.len() == 3, || "expected rooms 2, 4, 6".into());
    for (k, h) in &hvi {
        let Some(base) = vi.get(k) else { continue };
        j.require(h.flag && base.flag, || format!("rooms={k}: a planner did not converge"));
        j.require(h.y <= base.y, || format!("rooms={k}: {} HVI iterations > {} VI", h.y, base.y));
        let e = err.get(k);
        j.require(e.is_some_and(|r| r.flag), || {
            format!("rooms={k}: error {:?} above {PLANNER_ERROR_FACTOR}x the bound", e.map(|r| r.y))
        });
        j.require(samples.contains_key(k), || format!("rooms={k}: samples missing"));
        j.note(format!(
            "rooms={k}: iterations {}/{} (HVI/VI), samples {}/{}",
            h.y,
            base.y,
            samples.get(k).map_or(f64::NAN, |r| r.y),
            vi_samples.get(k).map_or(f64::NAN, |r| r.y)
        ));
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.sort_by(f64::total_cmp);
    super::quantile(&xs, 0.5)
}

fn toy_tasks(v: &View, j: &mut Judge) {
    let e = "c11_toy_tasks";
    let mut med: BTreeMap<(&str, &str, u64), f64> = BTreeMap::new();
    let mut samples: BTreeMap<(&str, &str, u64), Vec<f64>> = BTreeMap::new();
    for r in v.0.iter().filter(|r| r.experiment == e && r.metric == Metric::EpisodesToSolve) {
        samples.entry((r.env.as_str(), r.algorithm.as_str(), r.x as u64)).or_default().push(r.y);
    }
    for (k, ys) in samples {
        med.insert(k, median(ys));
    }
    let get = |task, alg, d| med.get(&(task, alg, d)).copied().unwrap_or(f64::NAN);
    let delays: Vec<u64> = {
        let mut d: Vec<u64> = med.keys().map(|k| k.2).collect();
        d.sort_unstable();
        d.dedup();
        d
    };
    j.require(delays.len() >= 2, || "need at least two delays".into());
    for task in ["choice", "trace_back"] {
        let mut table = Vec::new();
        for &d in &delays {
            let hql = get(task, "highway_q_learning", d);
            let best = ["q_lambda", "sarsa_lambda", "monte_carlo"]
                .iter()
                .map(|a| get(task, a, d))
                .fold(f64::INFINITY, f64::min);
            j.require(hql.is_finite(), || format!("{task} delay {d}: HQL median not finite"));
            j.require(hql <= best / TOY_SPEEDUP, || {
                format!("{task} delay {d}: HQL median {hql} > best baseline median {best} / {TOY_SPEEDUP}")
            });
            table.push(format!("d{d} hql={hql} q_lambda={} best={best}", get(task, "q_lambda", d)));
        }
        let (first, last) = (delays[0], *delays.last().unwrap_or(&0));
        let (h0, h1) = (get(task, "highway_q_learning", first), get(task, "highway_q_learning", last));
        j.require(h1 <= TOY_GROWTH * h0, || format!("{task}: HQL median grows {h0} -> {h1}"));
        let q: Vec<f64> = delays.iter().map(|&d| get(task, "q_lambda", d)).collect();
        let monotone = q.windows(2).all(|w| w[0] <= w[1]) && q[q.len() - 1] > q[0];
        j.require(monotone, || format!("{task}: Q(lambda) medians {q:?} do not grow"));
        j.note(format!("{task}: {}", table.join(", ")));
    }
}

fn gate_trace(v: &View, j: &mut Judge) {
    let e = "c12_gate_trace";
    for (name, want) in [("blue", 10.0), ("orange", 1.0), ("red", 1.0)] {
        let s = v.series(e, &format!("highway_generalized/all_forks/n=10/{name}"), Metric::GateChoice);
        match s.values().next_back() {
            Some(last) => {
                j.require(last.flag, || format!("{name}: trace ended before convergence"));
                j.require(last.y == want, || format!("{name}: gate picks {} not {want}", last.y));
            }
            None => j.require(false, || format!("{name}: no gate rows")),
        }
    }
    j.note("after convergence the gate picks n'=10 for blue and n'=1 for orange and red".into());
}
