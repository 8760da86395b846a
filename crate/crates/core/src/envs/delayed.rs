use std::collections::{HashMap, VecDeque};

use super::{EnvError, EpisodicEnv, Step};
use crate::mdp::TabularMdp;

/// Cap on the augmented state space.
pub const MAX_WRAPPED_STATES: usize = 2_000_000;

/// `(base state, nonzero rewards withheld, withheld expected sum bits)`.
type Key = (usize, usize, u64);

/// Withholds every reward and pays the accumulated sum when the episode ends.
///
/// The augmented state carries the base state, the number of nonzero rewards
/// withheld so far and their expected sum, so the wrapped task stays Markov.
#[derive(Debug, Clone)]
pub struct DelayedEnv<E> {
    inner: E,
    model: TabularMdp,
    index: HashMap<Key, usize>,
    origin: Vec<usize>,
    start: usize,
    key: Key,
    paid_acc: f64,
}

/// Wraps `inner`, enumerating the reachable augmented states.
pub fn delayed_wrapper<E: EpisodicEnv>(inner: E) -> Result<DelayedEnv<E>, EnvError> {
    let base = inner.model();
    let na = base.num_actions();
    let start_key = (inner.start_state(), 0, 0f64.to_bits());
    let mut index: HashMap<Key, usize> = HashMap::new();
    let mut keys: Vec<Key> = Vec::new();
    let mut queue = VecDeque::new();
    let intern = |key: Key,
                  index: &mut HashMap<Key, usize>,
                  keys: &mut Vec<Key>,
                  queue: &mut VecDeque<usize>|
     -> Result<usize, EnvError> {
        if let Some(&i) = index.get(&key) {
            return Ok(i);
        }
        if keys.len() >= MAX_WRAPPED_STATES {
            return Err(EnvError::TooLarge(MAX_WRAPPED_STATES));
        }
        let i = keys.len();
        index.insert(key, i);
        keys.push(key);
        queue.push_back(i);
        Ok(i)
    };
    intern(start_key, &mut index, &mut keys, &mut queue)?;

    let mut rows: Vec<Vec<(usize, f64)>> = Vec::new();
    let mut rewards: Vec<f64> = Vec::new();
    while let Some(i) = queue.pop_front() {
        let (s, count, acc_bits) = keys[i];
        let acc = f64::from_bits(acc_bits);
        rows.resize(keys.len().max(i + 1) * na, Vec::new());
        rewards.resize(rows.len(), 0.0);
        if base.is_terminal(s) {
            continue;
        }
        for a in 0..na {
            let r = base.reward(s, a);
            let key_next = |n: usize| -> Key {
                if base.is_terminal(n) {
                    (n, 0, 0f64.to_bits())
                } else {
                    (n, count + usize::from(r != 0.0), (acc + r).to_bits())
                }
            };
            let mut row = Vec::with_capacity(base.successors(s, a).len());
            let mut p_end = 0.0;
            for &(n, p) in base.successors(s, a) {
                if base.is_terminal(n) {
                    p_end += p;
                }
                row.push((intern(key_next(n), &mut index, &mut keys, &mut queue)?, p));
            }
            rows[i * na + a] = row;
            rewards[i * na + a] = p_end * (acc + r);
        }
    }

    let ns = keys.len();
    let mut b = TabularMdp::builder(ns, na, base.discount());
    for (i, &(s, _, _)) in keys.iter().enumerate() {
        if base.is_terminal(s) {
            b.terminal(i);
            continue;
        }
        for a in 0..na {
            for &(n, p) in &rows[i * na + a] {
                b.transition(i, a, n, p);
            }
            b.reward(i, a, rewards[i * na + a]);
        }
    }
    let model = b.build()?;
    let origin = keys.iter().map(|k| k.0).collect();
    Ok(DelayedEnv { inner, model, index, origin, start: 0, key: start_key, paid_acc: 0.0 })
}

impl<E: EpisodicEnv> DelayedEnv<E> {
    pub fn inner(&self) -> &E {
        &self.inner
    }

    /// Base-environment state underlying augmented state `s`.
    pub fn base_state(&self, s: usize) -> usize {
        self.origin[s]
    }
}

impl<E: EpisodicEnv> EpisodicEnv for DelayedEnv<E> {
    fn model(&self) -> &TabularMdp {
        &self.model
    }

    fn start_state(&self) -> usize {
        self.start
    }

    fn horizon(&self) -> usize {
        self.inner.horizon()
    }

    fn seed(&mut self, seed: u64) {
        self.inner.seed(seed);
    }

    fn reset(&mut self) -> usize {
        let s = self.inner.reset();
        self.key = (s, 0, 0f64.to_bits());
        self.paid_acc = 0.0;
        self.start
    }

    fn step(&mut self, action: usize) -> Result<Step, EnvError> {
        let (s, count, acc_bits) = self.key;
        let expected_r = self.inner.model().reward(s, action);
        let st = self.inner.step(action)?;
        self.paid_acc += st.reward;
        self.key = if self.inner.model().is_terminal(st.state) {
            (st.state, 0, 0f64.to_bits())
        } else {
            (st.state, count + usize::from(expected_r != 0.0), (f64::from_bits(acc_bits) + expected_r).to_bits())
        };
        let state = *self.index.get(&self.key).expect("augmented successor was enumerated");
        let reward = if st.done { self.paid_acc } else { 0.0 };
        Ok(Step { state, reward, done: st.done })
    }
}
