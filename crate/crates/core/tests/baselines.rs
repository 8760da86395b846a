mod common;

use common::{instance, random_q, rng, two_state};
use highway_core::baselines::{multistep_be_is, retrace_weight_profile, trace_operator, TraceKind, TraceScheme};
use highway_core::envs::random_policy;
use highway_core::mdp::{epsilon_greedy, greedy_policy, q_pi_oracle, PolicySet, PolicySpec, QTable, TabularMdp};
use highway_core::operators::{bellman_expectation, LookaheadSet};
use proptest::prelude::*;
use rand::Rng;

const IS_TOL: f64 = 1e-8;

/// Horizon with `γ^H · scale < 1e-10`.
fn horizon(gamma: f64, scale: f64) -> usize {
    ((1e-10 / scale.max(1.0)).ln() / gamma.ln()).ceil() as usize + 1
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn q_pi_is_fixed_by_every_is_operator(seed in any::<u64>(), lambda in 0.0f64..=1.0) {
        let mut r = rng(seed);
        let inst = instance(&mut r);
        let m = &inst.mdp;
        let target = random_policy(&mut r, m.num_states(), m.num_actions());
        let q_pi = q_pi_oracle(m, &target, 1e-13).unwrap();
        let out = multistep_be_is(m, &target, &inst.set, &inst.lookahead, &q_pi).unwrap();
        prop_assert!(out.sup_distance(&q_pi) <= IS_TOL);
        let h = horizon(m.discount(), q_pi.sup_norm());
        for kind in [TraceKind::Retrace, TraceKind::QLambda, TraceKind::FullIs] {
            let res = trace_operator(m, &target, inst.set.get(0).unwrap(), TraceScheme::new(kind, lambda).unwrap(), h, &q_pi).unwrap();
            prop_assert!(res.q.sup_distance(&q_pi) <= IS_TOL, "{kind:?}");
        }
    }

    #[test]
    fn full_is_trace_matches_multistep_is(seed in any::<u64>(), n in 1usize..7) {
        let mut r = rng(seed);
        let inst = instance(&mut r);
        let m = &inst.mdp;
        let target = random_policy(&mut r, m.num_states(), m.num_actions());
        let behavior = inst.set.get(0).unwrap().clone();
        let q = random_q(&mut r, m, 3.0);
        let single = PolicySet::uniform(vec![behavior.clone()]).unwrap();
        let ms = multistep_be_is(m, &target, &single, &LookaheadSet::single(n).unwrap(), &q).unwrap();
        let tr = trace_operator(m, &target, &behavior, TraceScheme::new(TraceKind::FullIs, 1.0).unwrap(), n, &q).unwrap();
        prop_assert!(ms.sup_distance(&tr.q) <= IS_TOL);
    }

    #[test]
    fn retrace_weights_never_increase(seed in any::<u64>(), lambda in 0.0f64..=1.0, len in 1usize..40) {
        let mut r = rng(seed);
        let (ns, na) = (6, 3);
        let target = random_policy(&mut r, ns, na);
        let behavior = random_policy(&mut r, ns, na);
        let traj: Vec<(usize, usize)> = (0..len).map(|_| (r.gen_range(0..ns), r.gen_range(0..na))).collect();
        let w = retrace_weight_profile(&target, &behavior, &traj, lambda).unwrap();
        prop_assert_eq!(w[0], 1.0);
        for (t, pair) in w.windows(2).enumerate() {
            prop_assert!(pair[1] <= pair[0]);
            prop_assert!(w[t + 1] <= lambda.powi(t as i32 + 1) + 1e-15);
        }
    }
}

#[test]
fn on_policy_multistep_is_is_the_expectation_chain() {
    let inst = instance(&mut rng(21));
    let m = &inst.mdp;
    let pi = inst.set.get(1).unwrap().clone();
    let q = random_q(&mut rng(22), m, 3.0);
    let out =
        multistep_be_is(m, &pi, &PolicySet::uniform(vec![pi.clone()]).unwrap(), &LookaheadSet::single(3).unwrap(), &q)
            .unwrap();
    let chain = (0..3).fold(q, |acc, _| bellman_expectation(m, &pi, &acc));
    assert!(out.sup_distance(&chain) <= 1e-12);
}

#[test]
fn one_step_is_by_hand_on_two_state() {
    let m = two_state(0.5);
    let target = PolicySpec::new(2, 2, vec![0.25, 0.75, 0.5, 0.5]).unwrap();
    let behavior = PolicySet::uniform(vec![PolicySpec::uniform(2, 2)]).unwrap();
    let q = QTable::from_values(2, 2, vec![2.0, 4.0, 0.0, 0.0]).unwrap();
    let out = multistep_be_is(&m, &target, &behavior, &LookaheadSet::single(1).unwrap(), &q).unwrap();
    // Action 1 loops to state 0 with reward 1; action 0 ends with reward 0.
    let cont = 0.25 * 2.0 + 0.75 * 4.0;
    assert!((out.get(0, 1) - (1.0 + 0.5 * cont)).abs() < 1e-12);
    assert_eq!(out.get(0, 0), 0.0);
}

#[test]
fn zero_lambda_trace_is_one_expectation_backup() {
    let inst = instance(&mut rng(31));
    let m = &inst.mdp;
    let target = random_policy(&mut rng(32), m.num_states(), m.num_actions());
    let q = random_q(&mut rng(33), m, 3.0);
    let expected = bellman_expectation(m, &target, &q);
    for kind in [TraceKind::Retrace, TraceKind::QLambda, TraceKind::FullIs] {
        let res =
            trace_operator(m, &target, inst.set.get(0).unwrap(), TraceScheme::new(kind, 0.0).unwrap(), 50, &q).unwrap();
        assert!(res.q.sup_distance(&expected) <= 1e-12);
    }
}

#[test]
fn on_policy_full_trace_on_a_chain_is_the_monte_carlo_return() {
    // 0 -> 1 -> 2 -> terminal 3 with rewards 1, 2, 4.
    let mut b = TabularMdp::builder(4, 1, 0.9);
    b.edge(0, 0, 1, 1.0).edge(1, 0, 2, 2.0).edge(2, 0, 3, 4.0).terminal(3);
    let m = b.build().unwrap();
    let pi = PolicySpec::uniform(4, 1);
    let q = QTable::from_values(4, 1, vec![-3.0, 7.0, 0.5, 0.0]).unwrap();
    let res = trace_operator(&m, &pi, &pi, TraceScheme::new(TraceKind::Retrace, 1.0).unwrap(), 10, &q).unwrap();
    let mc = 1.0 + 0.9 * 2.0 + 0.81 * 4.0;
    assert!((res.q.get(0, 0) - mc).abs() < 1e-12);
    assert!((res.q.get(1, 0) - (2.0 + 0.9 * 4.0)).abs() < 1e-12);
}

#[test]
fn retrace_profile_examples() {
    let pi = PolicySpec::uniform(3, 2);
    let traj = [(0, 1), (1, 0), (2, 1), (0, 0)];
    assert_eq!(retrace_weight_profile(&pi, &pi, &traj, 1.0).unwrap(), vec![1.0; 4]);

    let q = QTable::from_fn(5, 4, |s, a| if a == s % 4 { 1.0 } else { 0.0 });
    let target = greedy_policy(&q);
    let behavior = epsilon_greedy(&q, 0.2).unwrap();
    assert!((behavior.prob(0, 0) - 0.85).abs() < 1e-15);
    let greedy_traj: Vec<(usize, usize)> = (0..12).map(|t| (t % 5, (t % 5) % 4)).collect();
    let w = retrace_weight_profile(&target, &behavior, &greedy_traj, 0.5).unwrap();
    for (t, v) in w.iter().enumerate() {
        assert!((v - 0.5f64.powi(t as i32)).abs() < 1e-15);
    }
    assert_eq!(w.iter().position(|&v| v < 0.01), Some(7));
}
