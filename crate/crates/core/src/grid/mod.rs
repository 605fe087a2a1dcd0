//! Gridworld testbeds: level-based foraging and a two-road junction.

pub mod junction;
pub mod lbf;

pub use junction::{JunctionConfig, JunctionEnv, JunctionState};
pub use lbf::{lbf_observe, lbf_reset, lbf_step, LbfAction, LbfConfig, LbfEnv, LbfState};
