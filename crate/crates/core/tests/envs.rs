mod common;

use common::{q_star, rng, three_fork};
use highway_core::envs::{
    build_choice, build_multiroom, build_traceback, delayed_wrapper, ChoiceSpec, EpisodicEnv, MdpEnv, MultiRoomSpec,
    TraceBackSpec, ACTION_UP,
};
use highway_core::mdp::q_pi_oracle;
use rand::Rng;

fn multiroom_env(rooms: usize, size: usize, discount: f64) -> MdpEnv {
    let mr = build_multiroom(&MultiRoomSpec { discount, ..MultiRoomSpec::new(rooms, size) }).unwrap();
    MdpEnv::new(mr.mdp, mr.start, 200).unwrap()
}

/// Plays the same random actions in `env` and its delayed wrapper and
/// compares summed rewards, termination and underlying states.
fn assert_simulation_equivalent(env: MdpEnv, episodes: usize, seed: u64) {
    let mut plain = env.clone();
    let mut wrapped = delayed_wrapper(env).unwrap();
    let mut r = rng(seed);
    let na = plain.num_actions();
    for ep in 0..episodes {
        plain.seed(ep as u64);
        wrapped.seed(ep as u64);
        plain.reset();
        wrapped.reset();
        let (mut total_plain, mut total_wrapped) = (0.0, 0.0);
        loop {
            let a = r.gen_range(0..na);
            let p = plain.step(a).unwrap();
            let w = wrapped.step(a).unwrap();
            total_plain += p.reward;
            total_wrapped += w.reward;
            assert_eq!(p.done, w.done);
            assert_eq!(wrapped.base_state(w.state), p.state);
            if p.done {
                break;
            }
            assert_eq!(w.reward, 0.0);
        }
        assert_eq!(total_plain, total_wrapped, "episode {ep}");
    }
}

#[test]
fn delayed_wrapper_preserves_episode_returns() {
    assert_simulation_equivalent(multiroom_env(2, 3, 0.9), 400, 1);
    assert_simulation_equivalent(build_choice(&ChoiceSpec::new(6)).unwrap(), 300, 2);
    assert_simulation_equivalent(build_traceback(&TraceBackSpec::new(6)).unwrap(), 300, 3);
}

#[test]
fn undiscounted_wrapping_keeps_the_optimal_value() {
    for env in [
        build_choice(&ChoiceSpec { discount: 1.0, ..ChoiceSpec::new(7) }).unwrap(),
        build_traceback(&TraceBackSpec { discount: 1.0, ..TraceBackSpec::new(7) }).unwrap(),
    ] {
        let v = q_star(env.model()).max_row(env.start_state());
        let wrapped = delayed_wrapper(env).unwrap();
        let vw = q_star(wrapped.model()).max_row(wrapped.start_state());
        assert!((v - vw).abs() < 1e-12, "{v} vs {vw}");
    }
}

#[test]
fn discounted_wrapping_lowers_the_optimal_value() {
    let env = multiroom_env(2, 4, 0.9);
    let v = q_star(env.model()).max_row(env.start_state());
    let wrapped = delayed_wrapper(env).unwrap();
    let vw = q_star(wrapped.model()).max_row(wrapped.start_state());
    assert!(vw < v - 1e-9, "{vw} should be below {v}");
}

#[test]
fn zero_reward_env_wraps_to_zero_returns() {
    let spec = TraceBackSpec { payouts: [0.0; 4], ..TraceBackSpec::new(5) };
    let wrapped = delayed_wrapper(build_traceback(&spec).unwrap()).unwrap();
    assert_eq!(q_star(wrapped.model()).sup_norm(), 0.0);
}

#[test]
fn generated_undiscounted_models_are_episodic() {
    for env in [
        build_choice(&ChoiceSpec { discount: 1.0, ..ChoiceSpec::new(8) }).unwrap(),
        build_traceback(&TraceBackSpec { discount: 1.0, ..TraceBackSpec::new(8) }).unwrap(),
    ] {
        env.model().episodic_check().unwrap();
    }
}

#[test]
fn single_room_value_is_the_discounted_goal_reward() {
    let mr = build_multiroom(&MultiRoomSpec::new(1, 4)).unwrap();
    let v = q_star(&mr.mdp).max_row(mr.start);
    let expected = 1000.0 * 0.9f64.powi(mr.shortest_path as i32 - 1);
    assert!((v - expected).abs() < 1e-9, "{v} vs {expected}");
}

#[test]
fn trace_back_optimal_value_is_discounted_unit_payout() {
    let env = build_traceback(&TraceBackSpec::new(6)).unwrap();
    let v = q_star(env.model()).max_row(env.start_state());
    assert!((v - 0.99f64.powi(5)).abs() < 1e-12);
}

#[test]
fn choice_margin_between_first_actions() {
    let env = build_choice(&ChoiceSpec::new(6)).unwrap();
    let q = q_star(env.model());
    let s = env.start_state();
    let gap = (q.get(s, 1) - q.get(s, 0)) / 0.99f64.powi(5);
    assert!((gap - 1.0).abs() < 1e-12);
}

#[test]
fn three_fork_policy_ordering() {
    let tf = three_fork();
    let v: Vec<f64> =
        tf.policies().iter().map(|pi| q_pi_oracle(&tf.mdp, pi, 1e-13).unwrap().get(tf.start, ACTION_UP)).collect();
    assert!(v[0] >= v[1] && v[1] >= v[2]);
}
