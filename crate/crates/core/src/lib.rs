//! Tabular laboratory for gated multi-step Bellman operators.
//!
//! * [`mdp`]: finite MDPs, value tables, policies and exact oracles.
//! * [`operators`]: Bellman, multi-step and highway operators plus a
//!   fixed-point engine and distance diagnostics.
//! * [`baselines`]: importance-sampling corrected and trace-based operators.
//! * [`envs`]: benchmark environments and the episodic simulation interface.
//! * [`algorithms`]: Highway value iteration, Highway Q-learning and the
//!   classical planners and agents they are compared against.
//! * [`harness`]: experiment configs, CSV output and summary reports.

pub mod algorithms;
pub mod baselines;
pub mod envs;
pub mod harness;
pub mod mdp;
pub mod operators;
pub mod seed;

pub use mdp::{PolicySet, PolicySpec, QTable, TabularMdp, VTable};
