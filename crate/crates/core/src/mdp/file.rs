//! JSON document format for tabular MDPs.
//!
//! ```json
//! {"num_states": 2, "num_actions": 2, "gamma": 0.5, "terminal": [1],
//!  "transitions": [{"s": 0, "a": 0, "s'": 1, "p": 1.0}, ...],
//!  "rewards": [{"s": 0, "a": 1, "r": 1.0}]}
//! ```
//!
//! Terminal states may omit their transitions; missing rewards default to 0.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{MdpError, TabularMdp};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionEntry {
    pub s: usize,
    pub a: usize,
    #[serde(rename = "s'")]
    pub next: usize,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardEntry {
    pub s: usize,
    pub a: usize,
    pub r: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    #[serde(default)]
    pub terminal: Vec<usize>,
    pub transitions: Vec<TransitionEntry>,
    #[serde(default)]
    pub rewards: Vec<RewardEntry>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &TabularMdp) -> Self {
        let mut transitions = Vec::new();
        let mut rewards = Vec::new();
        for s in 0..mdp.num_states() {
            if mdp.is_terminal(s) {
                continue;
            }
            for a in 0..mdp.num_actions() {
                for &(next, p) in mdp.successors(s, a) {
                    transitions.push(TransitionEntry { s, a, next, p });
                }
                let r = mdp.reward(s, a);
                if r != 0.0 {
                    rewards.push(RewardEntry { s, a, r });
                }
            }
        }
        Self {
            num_states: mdp.num_states(),
            num_actions: mdp.num_actions(),
            gamma: mdp.discount(),
            terminal: (0..mdp.num_states()).filter(|&s| mdp.is_terminal(s)).collect(),
            transitions,
            rewards,
        }
    }

    pub fn into_mdp(self) -> Result<TabularMdp, MdpError> {
        let (ns, na) = (self.num_states, self.num_actions);
        let check = |what: &'static str, index: usize, bound: usize| {
            if index >= bound {
                Err(MdpError::IndexOutOfRange { what, index, bound })
            } else {
                Ok(())
            }
        };
        let mut b = TabularMdp::builder(ns, na, self.gamma);
        for &t in &self.terminal {
            check("terminal state", t, ns)?;
            b.terminal(t);
        }
        for e in &self.transitions {
            check("state", e.s, ns)?;
            check("action", e.a, na)?;
            check("next state", e.next, ns)?;
            b.transition(e.s, e.a, e.next, e.p);
        }
        for e in &self.rewards {
            check("state", e.s, ns)?;
            check("action", e.a, na)?;
            b.reward(e.s, e.a, e.r);
        }
        b.build()
    }
}

pub fn load_mdp(path: impl AsRef<Path>) -> Result<TabularMdp, MdpError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| MdpError::File(format!("{}: {e}", path.display())))?;
    let doc: MdpFile = serde_json::from_str(&text).map_err(|e| MdpError::File(format!("{}: {e}", path.display())))?;
    doc.into_mdp()
}

pub fn save_mdp(mdp: &TabularMdp, path: impl AsRef<Path>) -> Result<(), MdpError> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(&MdpFile::from_mdp(mdp)).map_err(|e| MdpError::File(e.to_string()))?;
    std::fs::write(path, text).map_err(|e| MdpError::File(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::fixtures::two_state;

    #[test]
    fn parses_documented_example() {
        let text = r#"{"num_states": 2, "num_actions": 2, "gamma": 0.5, "terminal": [1],
            "transitions": [{"s": 0, "a": 0, "s'": 1, "p": 1.0}, {"s": 0, "a": 1, "s'": 0, "p": 1.0}],
            "rewards": [{"s": 0, "a": 1, "r": 1.0}]}"#;
        let doc: MdpFile = serde_json::from_str(text).unwrap();
        assert_eq!(doc.into_mdp().unwrap(), two_state(0.5));
    }

    #[test]
    fn export_then_import_is_identity() {
        let mdp = two_state(0.5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        save_mdp(&mdp, &path).unwrap();
        assert_eq!(load_mdp(&path).unwrap(), mdp);
    }

    #[test]
    fn loader_reports_indices() {
        let doc = MdpFile {
            num_states: 2,
            num_actions: 1,
            gamma: 0.9,
            terminal: vec![],
            transitions: vec![
                TransitionEntry { s: 0, a: 0, next: 1, p: 1.0 },
                TransitionEntry { s: 1, a: 0, next: 0, p: 0.25 },
            ],
            rewards: vec![],
        };
        let err = doc.into_mdp().unwrap_err();
        assert!(matches!(err, MdpError::RowSum { state: 1, action: 0, .. }), "{err}");

        let doc = MdpFile {
            num_states: 1,
            num_actions: 1,
            gamma: 0.9,
            terminal: vec![],
            transitions: vec![TransitionEntry { s: 0, a: 2, next: 0, p: 1.0 }],
            rewards: vec![],
        };
        assert!(matches!(doc.into_mdp(), Err(MdpError::IndexOutOfRange { what: "action", index: 2, .. })));
    }
}
