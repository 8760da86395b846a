//! `highway`: runs experiments, property suites and acceptance checks.
//!
//! Exit codes: 0 success, 1 invalid input or failed run, 2 failed `--check`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use highway_core::envs::{
    build_choice, build_multiroom, build_threefork, build_traceback, random_mdp, ChoiceSpec, EpisodicEnv,
    MultiRoomSpec, RandomMdpSpec, ThreeForkSpec, TraceBackSpec,
};
use highway_core::harness::acceptance::{self, Outcome};
use highway_core::harness::{
    self, AgentName, AgentSpec, EnvSpec, ExperimentConfig, HarnessError, Metric, OperatorName, PolicySetChoice,
    PropertySuite, ResultRow, ToyTask,
};
use highway_core::mdp::save_mdp;
use highway_core::seed;

#[derive(Parser)]
#[command(name = "highway", version, about = "Gated multi-step Bellman operators on tabular MDPs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fixed points of operators for a list of lookahead depths.
    FixedPoint(OperatorArgs),
    /// Error curves and iteration counts until convergence.
    Convergence(OperatorArgs),
    /// Per-iteration gate choices of the generalized operator.
    GateTrace(OperatorArgs),
    /// Value iteration, policy iteration and highway value iteration on multi-room grids.
    Multiroom(MultiroomArgs),
    /// Episodes-to-solve of learning agents on the delayed-reward toy tasks.
    Toy(ToyArgs),
    /// Randomized property suites over random MDPs.
    Properties(PropertiesArgs),
    /// Runs acceptance criteria and prints one PASS/FAIL line per criterion.
    Acceptance {
        /// Criterion ids; all when omitted.
        ids: Vec<u8>,
    },
    /// Runs a config file or a named preset.
    Run {
        /// Path to a JSON config, or a preset name.
        config: String,
        #[command(flatten)]
        common: Common,
    },
    /// Lists presets, or prints one as JSON.
    Presets { name: Option<String> },
    /// Aggregates result CSVs into a summary table and plot data.
    Report {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long, default_value = "report")]
        out_dir: PathBuf,
    },
    /// Writes a generated environment in the MDP file format.
    ExportEnv {
        /// three_fork, multi_room:ROOMS:SIZE, choice:DELAY, trace_back:DELAY or random:STATES:ACTIONS:DISCOUNT[:SEED].
        #[arg(long)]
        env: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct Common {
    /// Output CSV; defaults to the config's output path, else stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Judge the result and exit with 2 when it fails.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct OperatorArgs {
    /// `three_fork` or a path to an MDP file.
    #[arg(long, default_value = "three_fork")]
    env: String,
    #[arg(long, value_delimiter = ',')]
    operator: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    policies: Vec<String>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    gate_threshold: Option<usize>,
    #[arg(long)]
    temperature: Option<f64>,
    /// Also emit every fixed-point entry.
    #[arg(long)]
    emit_tables: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct MultiroomArgs {
    #[arg(long, value_delimiter = ',')]
    rooms: Vec<usize>,
    #[arg(long)]
    room_size: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ToyArgs {
    /// choice, trace_back (or traceback).
    #[arg(long, value_delimiter = ',')]
    task: Vec<String>,
    #[arg(long, value_delimiter = ',')]
    delay: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    agents: Vec<String>,
    /// Number of seeds, run as 0..k.
    #[arg(long)]
    seeds: Option<u64>,
    #[arg(long)]
    max_episodes: Option<usize>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct PropertiesArgs {
    /// contraction, broken_gates, distances, softmax or is_baselines.
    #[arg(long)]
    suite: String,
    /// Number of seeds, run as 0..k.
    #[arg(long)]
    seeds: Option<u64>,
    /// Random MDPs per seed.
    #[arg(long)]
    count: Option<usize>,
    #[command(flatten)]
    common: Common,
}

enum Failure {
    Invalid(String),
    Check,
}

impl From<HarnessError> for Failure {
    fn from(e: HarnessError) -> Self {
        Failure::Invalid(e.to_string())
    }
}

fn invalid(path: &str, message: impl Into<String>) -> Failure {
    HarnessError::Validation { path: path.into(), message: message.into() }.into()
}

fn parse_name<T: DeserializeOwned>(flag: &str, s: &str) -> Result<T, Failure> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| invalid(flag, format!("unknown value {s:?}")))
}

fn seeds(k: u64) -> Vec<u64> {
    (0..k).collect()
}

fn operator_config(kind: &str, preset: &str, a: OperatorArgs) -> Result<(ExperimentConfig, Common), Failure> {
    let mut cfg = harness::preset(preset)?;
    cfg.id = kind.into();
    cfg.output = None;
    let env = if a.env == "three_fork" { EnvSpec::ThreeFork } else { EnvSpec::File { path: a.env.into() } };
    let op = cfg.operator.as_mut().expect("operator preset");
    if !a.operator.is_empty() {
        op.names = a.operator.iter().map(|s| parse_name::<OperatorName>("--operator", s)).collect::<Result<_, _>>()?;
    }
    if !a.n.is_empty() {
        op.depths = a.n;
    }
    if !a.policies.is_empty() {
        op.policy_sets =
            a.policies.iter().map(|s| parse_name::<PolicySetChoice>("--policies", s)).collect::<Result<_, _>>()?;
    } else if env != EnvSpec::ThreeFork {
        op.policy_sets = vec![PolicySetChoice::Uniform];
    }
    op.tol = a.tol.unwrap_or(op.tol);
    op.max_iters = a.max_iters.unwrap_or(op.max_iters);
    op.temperature = a.temperature.unwrap_or(op.temperature);
    op.gate_threshold = a.gate_threshold.or(op.gate_threshold);
    op.emit_tables |= a.emit_tables;
    cfg.env = Some(env);
    Ok((cfg, a.common))
}

fn multiroom_config(a: MultiroomArgs) -> Result<(ExperimentConfig, Common), Failure> {
    let mut cfg = harness::preset("fig_multiroom")?;
    cfg.id = "multiroom".into();
    cfg.output = None;
    if let Some(EnvSpec::MultiRoom { rooms, room_size }) = cfg.env.as_mut() {
        if !a.rooms.is_empty() {
            *rooms = a.rooms;
        }
        *room_size = a.room_size.unwrap_or(*room_size);
    }
    Ok((cfg, a.common))
}

fn toy_config(a: ToyArgs) -> Result<(ExperimentConfig, Common), Failure> {
    let mut cfg = harness::preset("fig_toy_tasks")?;
    cfg.id = "toy".into();
    cfg.output = None;
    if let Some(EnvSpec::Toy { tasks, delays }) = cfg.env.as_mut() {
        if !a.task.is_empty() {
            *tasks = a
                .task
                .iter()
                .map(|s| match s.as_str() {
                    "traceback" => Ok(ToyTask::TraceBack),
                    other => parse_name("--task", other),
                })
                .collect::<Result<_, _>>()?;
        }
        if !a.delay.is_empty() {
            *delays = a.delay;
        }
    }
    let agents: &mut AgentSpec = cfg.agents.as_mut().expect("agents preset");
    if !a.agents.is_empty() {
        agents.names = a
            .agents
            .iter()
            .map(|s| AgentName::parse(s).ok_or_else(|| invalid("--agents", format!("unknown agent {s:?}"))))
            .collect::<Result<_, _>>()?;
    }
    if let Some(m) = a.max_episodes {
        agents.hql.max_episodes = m;
        agents.classical.max_episodes = m;
    }
    if let Some(k) = a.seeds {
        cfg.seeds = seeds(k);
    }
    Ok((cfg, a.common))
}

fn properties_config(a: PropertiesArgs) -> Result<(ExperimentConfig, Common), Failure> {
    let suite =
        PropertySuite::parse(&a.suite).ok_or_else(|| invalid("--suite", format!("unknown suite {:?}", a.suite)))?;
    let name = match suite {
        PropertySuite::Contraction => "c05_contraction",
        PropertySuite::BrokenGates => "c06_broken_gate_random",
        PropertySuite::Distances => "c07_distances",
        PropertySuite::Softmax => "c08_softmax",
        PropertySuite::IsBaselines => "c09_is_baselines",
    };
    let mut cfg = harness::preset(name)?;
    if a.seeds.is_some() || a.count.is_some() {
        cfg.criterion = None;
    }
    if let Some(k) = a.seeds {
        cfg.seeds = seeds(k);
    }
    if let (Some(c), Some(EnvSpec::Random { count, .. })) = (a.count, cfg.env.as_mut()) {
        *count = c;
    }
    Ok((cfg, a.common))
}

fn load_config(arg: &str) -> Result<ExperimentConfig, Failure> {
    let path = Path::new(arg);
    if path.exists() || arg.ends_with(".json") {
        Ok(ExperimentConfig::load(path)?)
    } else {
        Ok(harness::preset(arg)?)
    }
}

/// Rows whose flag reflects a final outcome rather than a per-iteration trace.
fn judged_by_flag(r: &ResultRow) -> bool {
    !matches!(r.metric, Metric::ErrorCurve | Metric::GateChoice | Metric::QEntry)
}

fn check(cfg: &ExperimentConfig, rows: &[ResultRow]) -> Result<bool, Failure> {
    let Some(id) = cfg.criterion else {
        let bad: Vec<&ResultRow> = rows.iter().filter(|r| judged_by_flag(r) && !r.flag).collect();
        for r in bad.iter().take(10) {
            eprintln!("check: unflagged {} {} {} seed {} x={}", r.env, r.algorithm, r.metric.name(), r.seed, r.x);
        }
        let ok = bad.is_empty() && !rows.is_empty();
        println!(
            "{} {}: {} of {} rows within tolerance",
            if ok { "PASS" } else { "FAIL" },
            cfg.id,
            rows.len() - bad.len(),
            rows.len()
        );
        return Ok(ok);
    };
    let criterion = acceptance::criterion(id).ok_or_else(|| invalid("criterion", format!("no criterion {id}")))?;
    let mut all = rows.to_vec();
    for name in criterion.presets.iter().filter(|n| **n != cfg.id) {
        all.extend(harness::run(&harness::preset(name)?)?.into_result()?);
    }
    let outcome = acceptance::judge(id, all);
    println!("{}", outcome.line());
    Ok(outcome.passed)
}

/// Writes to stdout; a closed pipe ends output quietly.
fn emit(text: &str) -> Result<(), Failure> {
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Failure::Invalid(format!("stdout: {e}"))),
        _ => Ok(()),
    }
}

fn run_experiment(cfg: ExperimentConfig, common: Common) -> Result<(), Failure> {
    let out = harness::run(&cfg)?;
    let path = common.out.or_else(|| cfg.output.clone());
    match &path {
        Some(p) => harness::write_csv(p, &out.rows)?,
        None if !common.check => emit(&harness::rows_to_string(&out.rows))?,
        None => {}
    }
    let rows = out.into_result()?;
    if common.check && !check(&cfg, &rows)? {
        return Err(Failure::Check);
    }
    Ok(())
}

fn run_acceptance(ids: Vec<u8>) -> Result<(), Failure> {
    let ids = if ids.is_empty() { acceptance::CRITERIA.iter().map(|c| c.id).collect() } else { ids };
    let mut passed = true;
    for id in ids {
        let outcome: Outcome = acceptance::check(id)?;
        println!("{}", outcome.line());
        passed &= outcome.passed;
    }
    if passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

fn export_env(spec: &str, out: &Path) -> Result<(), Failure> {
    let parts: Vec<&str> = spec.split(':').collect();
    let num = |i: usize| -> Result<usize, Failure> {
        parts.get(i).and_then(|s| s.parse().ok()).ok_or_else(|| invalid("--env", format!("bad field {i} in {spec:?}")))
    };
    let mdp = match parts[0] {
        "three_fork" => build_threefork(&ThreeForkSpec::default()).map_err(HarnessError::from)?.mdp,
        "multi_room" => build_multiroom(&MultiRoomSpec::new(num(1)?, num(2)?)).map_err(HarnessError::from)?.mdp,
        "choice" => build_choice(&ChoiceSpec::new(num(1)?)).map_err(HarnessError::from)?.model().clone(),
        "trace_back" | "traceback" => {
            build_traceback(&TraceBackSpec::new(num(1)?)).map_err(HarnessError::from)?.model().clone()
        }
        "random" => {
            let discount: f64 =
                parts.get(3).and_then(|s| s.parse().ok()).ok_or_else(|| invalid("--env", "bad discount"))?;
            let seed_value = if parts.len() > 4 { num(4)? as u64 } else { 0 };
            let mut spec = RandomMdpSpec::new(num(1)?, num(2)?, discount);
            if discount >= 1.0 {
                spec = spec.terminal_states(1);
            }
            random_mdp(&mut seed::stream(seed_value, "export-env"), &spec).map_err(HarnessError::from)?
        }
        other => return Err(invalid("--env", format!("unknown environment {other:?}"))),
    };
    save_mdp(&mdp, out).map_err(HarnessError::from)?;
    Ok(())
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::FixedPoint(a) => {
            let (cfg, common) = operator_config("fixed_point", "fig_fixed_point", a)?;
            run_experiment(cfg, common)
        }
        Command::Convergence(a) => {
            let (cfg, common) = operator_config("convergence", "fig_convergence", a)?;
            run_experiment(cfg, common)
        }
        Command::GateTrace(a) => {
            let (cfg, common) = operator_config("gate_trace", "fig_gate_trace", a)?;
            run_experiment(cfg, common)
        }
        Command::Multiroom(a) => {
            let (cfg, common) = multiroom_config(a)?;
            run_experiment(cfg, common)
        }
        Command::Toy(a) => {
            let (cfg, common) = toy_config(a)?;
            run_experiment(cfg, common)
        }
        Command::Properties(a) => {
            let (cfg, common) = properties_config(a)?;
            run_experiment(cfg, common)
        }
        Command::Run { config, common } => run_experiment(load_config(&config)?, common),
        Command::Acceptance { ids } => run_acceptance(ids),
        Command::Presets { name: None } => {
            emit(&harness::preset_names().iter().map(|n| format!("{n}\n")).collect::<String>())
        }
        Command::Presets { name: Some(n) } => emit(&format!("{}\n", harness::preset(&n)?.to_json())),
        Command::Report { paths, out_dir } => {
            let summary = harness::report(&paths, &out_dir)?;
            println!("{} summary rows written to {}", summary.len(), out_dir.display());
            Ok(())
        }
        Command::ExportEnv { env, out } => export_env(&env, &out),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Check) => ExitCode::from(2),
    }
}
