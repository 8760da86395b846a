#![allow(dead_code)]

use highway_core::envs::{build_threefork, random_mdp, random_policy, RandomMdpSpec, ThreeFork, ThreeForkSpec};
use highway_core::mdp::{q_star_oracle, PolicySet, QTable, TabularMdp};
use highway_core::operators::LookaheadSet;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    highway_core::seed::stream(seed, "integration")
}

pub fn three_fork() -> ThreeFork {
    build_threefork(&ThreeForkSpec::default()).unwrap()
}

pub fn fork_set(tf: &ThreeFork) -> PolicySet {
    PolicySet::uniform(tf.policies()).unwrap()
}

pub fn q_star(mdp: &TabularMdp) -> QTable {
    q_star_oracle(mdp, 1e-13).unwrap()
}

pub fn random_q(rng: &mut ChaCha8Rng, mdp: &TabularMdp, scale: f64) -> QTable {
    let mut q = QTable::from_fn(mdp.num_states(), mdp.num_actions(), |_, _| rng.gen_range(-scale..scale));
    for s in (0..mdp.num_states()).filter(|&s| mdp.is_terminal(s)) {
        q.row_mut(s).fill(0.0);
    }
    q
}

/// Random discounted MDP with a terminal state, three random policies and a
/// random nonempty depth subset of 1..=5 with random selection weights.
pub struct Instance {
    pub mdp: TabularMdp,
    pub set: PolicySet,
    pub lookahead: LookaheadSet,
}

pub fn instance(rng: &mut ChaCha8Rng) -> Instance {
    let states = rng.gen_range(3..9);
    let actions = rng.gen_range(2..4);
    let gamma = rng.gen_range(0.5..0.95);
    let spec = RandomMdpSpec::new(states, actions, gamma).terminal_states(1);
    let mdp = random_mdp(rng, &spec).unwrap();
    let policies: Vec<_> = (0..3).map(|_| random_policy(rng, states, actions)).collect();
    let mut weights: Vec<f64> = (0..3).map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let set = PolicySet::uniform(policies).unwrap().with_selection(weights).unwrap();
    let mut depths: Vec<usize> = (1..=5).filter(|_| rng.gen_bool(0.5)).collect();
    if depths.is_empty() {
        depths.push(rng.gen_range(1..=5));
    }
    let lookahead = LookaheadSet::uniform(depths).unwrap();
    Instance { mdp, set, lookahead }
}

/// State 0 can loop (reward 1) or move to the terminal state 1 (reward 0).
pub fn two_state(gamma: f64) -> TabularMdp {
    let mut b = TabularMdp::builder(2, 2, gamma);
    b.edge(0, 0, 1, 0.0).edge(0, 1, 0, 1.0).terminal(1);
    b.build().unwrap()
}
