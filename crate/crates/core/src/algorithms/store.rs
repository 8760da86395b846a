use std::collections::HashMap;

use serde::{Deserialize, Serialize};

/// One recorded episode `s_0, a_0, r_0, ..., s_T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    pub policy: usize,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    /// `s_T`.
    pub final_state: usize,
    /// Whether `s_T` is terminal; otherwise the episode was truncated.
    pub terminal: bool,
}

impl Episode {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    /// State reached after step `t`, i.e. `s_{t+1}`.
    pub fn next_state(&self, t: usize) -> usize {
        if t + 1 < self.states.len() {
            self.states[t + 1]
        } else {
            self.final_state
        }
    }

    /// Whether `s_t` for `t = len` is terminal; intermediate states never are.
    fn ends_terminal_at(&self, t: usize) -> bool {
        t == self.len() && self.terminal
    }
}

/// Reference to the suffix of episode `episode` starting at step `offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuffixRef {
    pub episode: usize,
    pub offset: usize,
}

/// Append-only episode store with per-policy suffix datasets.
///
/// `suffixes(m, s, a)` lists every stored suffix that starts with `(s, a)`
/// and was generated by policy `m`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct TrajectoryStore {
    episodes: Vec<Episode>,
    suffix_index: HashMap<(usize, usize, usize), Vec<SuffixRef>>,
    policies_by_pair: HashMap<(usize, usize), Vec<usize>>,
    sa_buffer: Vec<(usize, usize)>,
}

impl TrajectoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends an episode and indexes all of its suffixes. Returns its id.
    pub fn push(&mut self, episode: Episode) -> usize {
        let id = self.episodes.len();
        let m = episode.policy;
        for t in 0..episode.len() {
            let (s, a) = (episode.states[t], episode.actions[t]);
            let refs = self.suffix_index.entry((m, s, a)).or_default();
            if refs.is_empty() {
                let ms = self.policies_by_pair.entry((s, a)).or_default();
                if ms.last() != Some(&m) {
                    ms.push(m);
                }
            }
            refs.push(SuffixRef { episode: id, offset: t });
            self.sa_buffer.push((s, a));
        }
        self.episodes.push(episode);
        id
    }

    pub fn episodes(&self) -> &[Episode] {
        &self.episodes
    }

    pub fn episode(&self, id: usize) -> &Episode {
        &self.episodes[id]
    }

    pub fn suffixes(&self, policy: usize, s: usize, a: usize) -> &[SuffixRef] {
        self.suffix_index.get(&(policy, s, a)).map_or(&[], Vec::as_slice)
    }

    /// Policies with a nonempty dataset at `(s, a)`, in insertion order.
    pub fn policies_at(&self, s: usize, a: usize) -> &[usize] {
        self.policies_by_pair.get(&(s, a)).map_or(&[], Vec::as_slice)
    }

    /// Every visited `(s, a)`, one entry per visit.
    pub fn sa_buffer(&self) -> &[(usize, usize)] {
        &self.sa_buffer
    }

    pub fn suffix_len(&self, r: SuffixRef) -> usize {
        self.episodes[r.episode].len() - r.offset
    }

    /// `n`-step returns of suffix `r` for `n = 1..=suffix_len`:
    /// `Σ_{i<n} γ^i r_i + γ^n bootstrap(s_n)`, with `bootstrap` skipped at a
    /// terminal end.
    pub fn n_step_returns(&self, r: SuffixRef, gamma: f64, bootstrap: impl Fn(usize) -> f64) -> Vec<f64> {
        let ep = &self.episodes[r.episode];
        let len = ep.len() - r.offset;
        let mut out = Vec::with_capacity(len);
        let mut acc = 0.0;
        let mut disc = 1.0;
        for i in 0..len {
            let t = r.offset + i;
            acc += disc * ep.rewards[t];
            disc *= gamma;
            let tail = if ep.ends_terminal_at(t + 1) { 0.0 } else { disc * bootstrap(ep.next_state(t)) };
            out.push(acc + tail);
        }
        out
    }
}
