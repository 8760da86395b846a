//! Benchmark environments and the episodic simulation interface.

mod delayed;
mod multiroom;
mod random;
mod threefork;
mod toy;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

pub use delayed::{delayed_wrapper, DelayedEnv};
pub use multiroom::{build_multiroom, MultiRoom, MultiRoomSpec};
pub use random::{random_mdp, random_policy, RandomMdpSpec};
pub use threefork::{build_threefork, ThreeFork, ThreeForkSpec, ACTION_DOWN, ACTION_UP};
pub use toy::{build_choice, build_traceback, ChoiceSpec, TraceBackSpec};

use crate::mdp::{MdpError, TabularMdp};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid environment spec: {0}")]
    Spec(String),
    #[error("step called after the episode ended")]
    EpisodeOver,
    #[error("action {action} out of range (< {bound})")]
    Action { action: usize, bound: usize },
    #[error("wrapped state space exceeds {0} states")]
    TooLarge(usize),
    #[error(transparent)]
    Mdp(#[from] MdpError),
}

/// Outcome of one environment step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub state: usize,
    pub reward: f64,
    pub done: bool,
}

/// Finite-horizon episodic environment over a tabular state space.
///
/// `model()` exposes the expected-reward MDP the simulator samples from, so
/// agents' greedy policies can be scored exactly.
pub trait EpisodicEnv {
    fn model(&self) -> &TabularMdp;
    fn start_state(&self) -> usize;
    fn horizon(&self) -> usize;
    /// Re-seeds the environment's private random stream.
    fn seed(&mut self, seed: u64);
    fn reset(&mut self) -> usize;
    fn step(&mut self, action: usize) -> Result<Step, EnvError>;

    fn num_states(&self) -> usize {
        self.model().num_states()
    }

    fn num_actions(&self) -> usize {
        self.model().num_actions()
    }
}

/// Simulator for a [`TabularMdp`] with optional zero-mean reward noise.
///
/// Rewards are `r(s,a) + u·noise(s,a)` with `u ~ U[−1, 1]`; episodes end on
/// a terminal state or after `horizon` steps.
#[derive(Debug, Clone)]
pub struct MdpEnv {
    mdp: TabularMdp,
    start: usize,
    horizon: usize,
    noise: Vec<f64>,
    rng: ChaCha8Rng,
    state: usize,
    t: usize,
    done: bool,
}

impl MdpEnv {
    pub fn new(mdp: TabularMdp, start: usize, horizon: usize) -> Result<Self, EnvError> {
        if start >= mdp.num_states() {
            return Err(EnvError::Spec(format!("start state {start} out of range")));
        }
        if horizon == 0 {
            return Err(EnvError::Spec("horizon must be positive".into()));
        }
        let noise = vec![0.0; mdp.num_states() * mdp.num_actions()];
        Ok(Self { mdp, start, horizon, noise, rng: ChaCha8Rng::seed_from_u64(0), state: start, t: 0, done: false })
    }

    /// Sets the noise amplitude on `(s, a)`.
    pub fn with_noise(mut self, s: usize, a: usize, amplitude: f64) -> Self {
        let na = self.mdp.num_actions();
        self.noise[s * na + a] = amplitude.abs();
        self
    }

    pub fn noise(&self, s: usize, a: usize) -> f64 {
        self.noise[s * self.mdp.num_actions() + a]
    }

    pub fn current_state(&self) -> usize {
        self.state
    }
}

impl EpisodicEnv for MdpEnv {
    fn model(&self) -> &TabularMdp {
        &self.mdp
    }

    fn start_state(&self) -> usize {
        self.start
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn seed(&mut self, seed: u64) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
    }

    fn reset(&mut self) -> usize {
        self.state = self.start;
        self.t = 0;
        self.done = self.mdp.is_terminal(self.start);
        self.state
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeOver);
        }
        let na = self.mdp.num_actions();
        if action >= na {
            return Err(EnvError::Action { action, bound: na });
        }
        let row = self.mdp.successors(self.state, action);
        let next = if row.len() == 1 {
            row[0].0
        } else {
            let u: f64 = self.rng.gen();
            let mut acc = 0.0;
            let mut pick = row[row.len() - 1].0;
            for &(n, p) in row {
                acc += p;
                if u < acc {
                    pick = n;
                    break;
                }
            }
            pick
        };
        let mut reward = self.mdp.reward(self.state, action);
        let amp = self.noise[self.state * na + action];
        if amp > 0.0 {
            reward += amp * self.rng.gen_range(-1.0..=1.0);
        }
        self.state = next;
        self.t += 1;
        self.done = self.mdp.is_terminal(next) || self.t >= self.horizon;
        Ok(Step { state: next, reward, done: self.done })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_after_done_is_rejected() {
        let mut b = TabularMdp::builder(2, 1, 0.9);
        b.edge(0, 0, 1, 2.0).terminal(1);
        let mut env = MdpEnv::new(b.build().unwrap(), 0, 5).unwrap();
        env.reset();
        let st = env.step(0).unwrap();
        assert_eq!(st, Step { state: 1, reward: 2.0, done: true });
        assert!(matches!(env.step(0), Err(EnvError::EpisodeOver)));
        env.reset();
        assert!(matches!(env.step(3), Err(EnvError::Action { .. })));
    }

    #[test]
    fn horizon_truncates() {
        let mut b = TabularMdp::builder(1, 1, 0.9);
        b.edge(0, 0, 0, 1.0);
        let mut env = MdpEnv::new(b.build().unwrap(), 0, 3).unwrap();
        env.reset();
        let dones: Vec<bool> = (0..3).map(|_| env.step(0).unwrap().done).collect();
        assert_eq!(dones, vec![false, false, true]);
    }
}
