mod common;

use common::{q_star, three_fork, two_state};
use highway_core::algorithms::{
    episodes_to_solve, highway_q_learning, highway_value_iteration, monte_carlo_agent, n_step_q_agent,
    policy_iteration, q_lambda_agent, sarsa_lambda_agent, AgentParams, HqlParams, HviParams, LearningLog, Solve,
    SolveCriterion,
};
use highway_core::envs::{
    build_choice, build_multiroom, build_traceback, ChoiceSpec, EpisodicEnv, MdpEnv, MultiRoomSpec, TraceBackSpec,
};
use highway_core::mdp::TabularMdp;
use highway_core::operators::LookaheadSet;

const TOL: f64 = 1e-10;

fn multiroom(rooms: usize) -> TabularMdp {
    build_multiroom(&MultiRoomSpec::new(rooms, 4)).unwrap().mdp
}

fn v_star_error(mdp: &TabularMdp, v: &[f64]) -> f64 {
    let qs = q_star(mdp);
    v.iter().enumerate().map(|(s, x)| (x - qs.max_row(s)).abs()).fold(0.0, f64::max)
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn episodes(log: &LearningLog) -> f64 {
    log.solved().episodes().map_or(f64::INFINITY, |e| e as f64)
}

#[test]
fn value_iteration_on_two_state() {
    let rep = highway_core::algorithms::value_iteration(&two_state(0.5), TOL, 10_000).unwrap();
    assert!((rep.v.get(0) - 2.0).abs() < 1e-9);
}

#[test]
fn planners_agree_with_the_oracle_on_two_rooms() {
    let mdp = multiroom(2);
    let vi = highway_core::algorithms::value_iteration(&mdp, TOL, 100_000).unwrap();
    let hvi = highway_value_iteration(&mdp, &HviParams::multiroom_defaults()).unwrap();
    assert!(vi.v.sup_distance(&hvi.v) <= 1e-8);
    assert!(v_star_error(&mdp, hvi.v.values()) <= 10.0 * TOL);
    let pi = policy_iteration(&mdp, 5, TOL, 100_000).unwrap();
    assert!(v_star_error(&mdp, pi.v.values()) <= 10.0 * TOL);
}

#[test]
fn iterations_grow_with_rooms_and_highway_never_needs_more() {
    let mut last = 0;
    for rooms in [2, 4, 6] {
        let mdp = multiroom(rooms);
        let vi = highway_core::algorithms::value_iteration(&mdp, TOL, 100_000).unwrap();
        let hvi = highway_value_iteration(&mdp, &HviParams::multiroom_defaults()).unwrap();
        assert!(vi.iterations > last, "rooms={rooms}");
        assert!(hvi.iterations <= vi.iterations, "rooms={rooms}");
        last = vi.iterations;
    }
}

#[test]
fn highway_iterates_stay_below_v_star() {
    let tf = three_fork();
    for mdp in [multiroom(2), multiroom(3), tf.mdp] {
        let qs = q_star(&mdp);
        for bound in [1e2, 10.0, 1.0, 0.1, 1e-3, 1e-6] {
            let params = HviParams { error_bound: bound, ..HviParams::multiroom_defaults() };
            let rep = highway_value_iteration(&mdp, &params).unwrap();
            for s in 0..mdp.num_states() {
                assert!(rep.v.get(s) <= qs.max_row(s) + 1e-9);
            }
        }
    }
}

#[test]
fn single_depth_highway_is_value_iteration() {
    let mdp = multiroom(3);
    let params =
        HviParams { add_interval: 1, lookahead: LookaheadSet::single(1).unwrap(), ..HviParams::multiroom_defaults() };
    let hvi = highway_value_iteration(&mdp, &params).unwrap();
    let vi = highway_core::algorithms::value_iteration(&mdp, TOL, 100_000).unwrap();
    assert_eq!(hvi.iterations, vi.iterations);
    assert!(hvi.v.sup_distance(&vi.v) <= 1e-9);
}

#[test]
fn zero_discount_planners_stop_quickly() {
    let mdp = two_state(0.0);
    assert!(highway_core::algorithms::value_iteration(&mdp, TOL, 100).unwrap().iterations <= 2);
    assert!(highway_value_iteration(&mdp, &HviParams::multiroom_defaults()).unwrap().iterations <= 2);
}

#[test]
fn highway_q_learning_solves_trace_back() {
    let mut env = build_traceback(&TraceBackSpec::new(6)).unwrap();
    let log = highway_q_learning(&mut env, &HqlParams::default(), 3).unwrap();
    assert!(log.solved().episodes().is_some());
    let q = log.final_q().unwrap();
    let qs = q_star(env.model());
    let s0 = env.start_state();
    assert_eq!(q.argmax_row(s0), qs.argmax_row(s0));
}

#[test]
fn one_step_highway_q_learning_recovers_q_star_on_a_deterministic_task() {
    let mut env = build_traceback(&TraceBackSpec::new(4)).unwrap();
    let params = HqlParams {
        max_depth: Some(1),
        max_episodes: 400,
        stop_when_solved: false,
        epsilon: 0.5,
        ..HqlParams::default()
    };
    let log = highway_q_learning(&mut env, &params, 9).unwrap();
    let q = log.final_q().unwrap();
    let qs = q_star(env.model());
    let s0 = env.start_state();
    for a in 0..env.num_actions() {
        assert!((q.get(s0, a) - qs.get(s0, a)).abs() <= 1e-2, "action {a}");
    }
}

#[test]
fn agents_are_deterministic_given_seeds() {
    let env = build_choice(&ChoiceSpec::new(5)).unwrap();
    let params = AgentParams { max_episodes: 60, ..AgentParams::default() };
    type Agent = fn(&mut MdpEnv, &AgentParams, u64) -> Result<LearningLog, highway_core::algorithms::AlgorithmError>;
    let agents: [Agent; 4] = [q_lambda_agent, sarsa_lambda_agent, monte_carlo_agent, n_step_q_agent];
    for agent in agents {
        let a = agent(&mut env.clone(), &params, 4).unwrap();
        let b = agent(&mut env.clone(), &params, 4).unwrap();
        assert_eq!(a, b);
    }
    let hql = HqlParams { max_episodes: 60, ..HqlParams::default() };
    assert_eq!(
        highway_q_learning(&mut env.clone(), &hql, 4).unwrap(),
        highway_q_learning(&mut env.clone(), &hql, 4).unwrap()
    );
}

#[test]
fn monte_carlo_solves_choice() {
    let mut env = build_choice(&ChoiceSpec::new(6)).unwrap();
    let log = monte_carlo_agent(&mut env, &AgentParams::default(), 0).unwrap();
    assert!(log.solved().episodes().is_some());
}

fn log_with(evaluations: Vec<f64>) -> LearningLog {
    LearningLog {
        algorithm: "fixture".into(),
        returns: vec![0.0; evaluations.len() - 1],
        evaluations,
        criterion: SolveCriterion::new(1.0),
        budget: 30,
        snapshots: Vec::new(),
    }
}

#[test]
fn solve_criterion_examples() {
    let always = log_with(vec![1.0; 12]);
    assert_eq!(episodes_to_solve(&always, &always.criterion), Solve::Solved { episodes: 0 });
    let never = log_with(vec![0.5; 31]);
    assert_eq!(episodes_to_solve(&never, &never.criterion), Solve::NotSolved { budget: 30 });
    let mut late = vec![0.0; 5];
    late.extend([1.0; 10]);
    assert_eq!(log_with(late).solved(), Solve::Solved { episodes: 5 });
}

fn median_episodes(env: &MdpEnv, seeds: u64, run: impl Fn(&mut MdpEnv, u64) -> LearningLog) -> f64 {
    median((0..seeds).map(|s| episodes(&run(&mut env.clone(), s))).collect())
}

#[test]
fn highway_q_learning_is_insensitive_to_choice_delay() {
    let hql = |env: &mut MdpEnv, s| highway_q_learning(env, &HqlParams::default(), s).unwrap();
    let short = median_episodes(&build_choice(&ChoiceSpec::new(10)).unwrap(), 20, hql);
    let long = median_episodes(&build_choice(&ChoiceSpec::new(100)).unwrap(), 20, hql);
    assert!(short.is_finite() && long.is_finite());
    assert!(long <= 2.0 * short && short <= 2.0 * long, "{short} vs {long}");
}

#[test]
#[ignore = "baselines solve the reconstructed toy tasks as fast as highway Q-learning"]
fn highway_q_learning_beats_baselines_on_trace_back() {
    let env = build_traceback(&TraceBackSpec::new(10)).unwrap();
    let p = AgentParams::default();
    let h = median_episodes(&env, 20, |e, s| highway_q_learning(e, &HqlParams::default(), s).unwrap());
    let q = median_episodes(&env, 20, |e, s| q_lambda_agent(e, &p, s).unwrap());
    let sarsa = median_episodes(&env, 20, |e, s| sarsa_lambda_agent(e, &p, s).unwrap());
    let mc = median_episodes(&env, 20, |e, s| monte_carlo_agent(e, &p, s).unwrap());
    assert!(h.is_finite() && h < q && h < sarsa && h < mc, "{h} vs {q}, {sarsa}, {mc}");
}

#[test]
#[ignore = "classical agents do not slow down with delay on the reconstructed toy tasks"]
fn classical_agents_slow_down_with_delay() {
    let p = AgentParams::default();
    let q = |d| {
        median_episodes(&build_traceback(&TraceBackSpec::new(d)).unwrap(), 20, |e, s| q_lambda_agent(e, &p, s).unwrap())
    };
    let mc = |d| {
        median_episodes(&build_choice(&ChoiceSpec::new(d)).unwrap(), 20, |e, s| monte_carlo_agent(e, &p, s).unwrap())
    };
    assert!(q(6) < q(12) && q(12) < q(18));
    assert!(mc(6) < mc(18));
}
