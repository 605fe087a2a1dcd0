//! The environment contract shared by every testbed.
//!
//! An environment is a seeded dec-POMDP: a global state with a dense integer
//! key, one local observation per agent, joint actions, and a single team
//! reward. Tabular learners key their tables on [`StateKey`] (global) and on
//! interned [`Observation`]s (local).

mod matrix;

pub use matrix::{
    build_assurance_game, build_nonmonotonic_game, AlphaGameSpec, GameKind, MatrixGame,
    PayoffMatrix, ASSURANCE_COUPLED, ASSURANCE_DECOUPLED, NONMONOTONIC_AT_ONE,
    NONMONOTONIC_AT_ZERO,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Dense integer encoding of a full global state.
pub type StateKey = u64;

/// Fixed-length local observation encoding.
pub type Observation = Vec<u16>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("environment stepped before reset")]
    NotReset,
    #[error("environment stepped after reaching a terminal state")]
    Terminal,
    #[error("expected {expected} actions, got {got}")]
    WrongArity { expected: usize, got: usize },
    #[error("action {action} out of range for agent {agent} ({count} actions)")]
    ActionOutOfRange {
        agent: usize,
        action: usize,
        count: usize,
    },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub n_agents: usize,
    pub action_counts: Vec<usize>,
    /// `None` when the state space is not enumerated.
    pub state_count: Option<u64>,
    pub episode_limit: usize,
    pub discount: f64,
}

impl EnvSpec {
    pub fn validate(&self) -> Result<(), EnvError> {
        if self.n_agents < 2 {
            return Err(EnvError::Config(format!(
                "need at least 2 agents, got {}",
                self.n_agents
            )));
        }
        if self.action_counts.len() != self.n_agents {
            return Err(EnvError::Config(
                "one action count per agent is required".into(),
            ));
        }
        if let Some(i) = self.action_counts.iter().position(|&c| c < 2) {
            return Err(EnvError::Config(format!(
                "agent {i} needs at least 2 actions"
            )));
        }
        if self.episode_limit == 0 {
            return Err(EnvError::Config("episode_limit must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(EnvError::Config(format!(
                "discount {} outside [0, 1)",
                self.discount
            )));
        }
        Ok(())
    }

    pub fn joint_action_count(&self) -> usize {
        self.action_counts.iter().product()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub team_reward: f64,
    /// Individual rewards, when the environment attributes them. Their sum
    /// is `team_reward`.
    pub agent_rewards: Option<Vec<f64>>,
    pub next_state: StateKey,
    pub observations: Vec<Observation>,
    pub terminal: bool,
}

/// A seeded, single-threaded dec-POMDP instance.
pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    /// Resets to an initial state drawn deterministically from `seed`.
    fn reset(&mut self, seed: u64) -> (StateKey, Vec<Observation>);

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome, EnvError>;

    fn state_key(&self) -> StateKey;

    /// Grid coordinate used to lay out per-state heatmaps, if the
    /// environment has one.
    fn focal_cell(&self, _state: StateKey) -> Option<(i64, i64)> {
        None
    }

    /// Largest achievable episode return, used for normalised scores.
    fn max_return(&self) -> f64;
}

pub(crate) fn check_joint_action(spec: &EnvSpec, joint_action: &[usize]) -> Result<(), EnvError> {
    if joint_action.len() != spec.n_agents {
        return Err(EnvError::WrongArity {
            expected: spec.n_agents,
            got: joint_action.len(),
        });
    }
    for (agent, (&action, &count)) in joint_action.iter().zip(&spec.action_counts).enumerate() {
        if action >= count {
            return Err(EnvError::ActionOutOfRange {
                agent,
                action,
                count,
            });
        }
    }
    Ok(())
}

/// Flattens a joint action into a single index (agent 0 most significant).
pub fn flatten_joint_action(action_counts: &[usize], joint_action: &[usize]) -> usize {
    joint_action
        .iter()
        .zip(action_counts)
        .fold(0, |acc, (&a, &n)| acc * n + a)
}

pub fn unflatten_joint_action(action_counts: &[usize], mut index: usize) -> Vec<usize> {
    let mut joint = vec![0; action_counts.len()];
    for (slot, &n) in joint.iter_mut().zip(action_counts).rev() {
        *slot = index % n;
        index /= n;
    }
    joint
}
