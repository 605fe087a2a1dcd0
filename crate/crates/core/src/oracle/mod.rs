//! Exact dynamic programming for the switching problem on small finite MDPs.
//!
//! At every state the controller either lets the agents pick any joint action
//! directly, or intervenes: the centralised policy's action is played and a
//! cost `c` is paid. [`bellman_backup`] is the corresponding operator,
//! [`solve_switching`] its fixed point, [`heaviside_policy`] the activation
//! rule read off the fixed point, and [`brute_force_switching`] an
//! independent check by exhaustive policy enumeration. [`solve_budgeted`]
//! solves the variant with a finite activation budget on the augmented state
//! space `S × {0..n}`.
//!
//! An MDP may restrict which joint actions are available without
//! intervention (`independent_actions`); the intervention branch always has
//! access to the centralised action.

mod brute;
mod switching;

pub use brute::{brute_force_switching, BruteForceResult, MAX_ENUMERATED_POLICIES};
pub use switching::{
    action_values, bellman_backup, heaviside_policy, heaviside_policy_masked, intervention_value,
    simulate_budgeted_rollout, solve_budgeted, solve_switching, BudgetedSolution, SwitchSolution,
};

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("invalid MDP: {0}")]
    InvalidMdp(String),
    #[error("value iteration did not reach residual {tolerance} within {iterations} iterations")]
    NonConvergence { iterations: usize, tolerance: f64 },
    #[error("{policies} policies exceed the enumeration cap of {cap}")]
    EnumerationOverflow { policies: f64, cap: usize },
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error("singular policy-evaluation system")]
    Singular,
    #[error("reading fixture: {0}")]
    Io(#[from] std::io::Error),
    #[error("parsing fixture: {0}")]
    Parse(#[from] serde_json::Error),
}

/// Finite MDP over flattened joint actions.
///
/// Fixture format (JSON):
///
/// ```json
/// {
///   "states": 2, "actions": 2, "discount": 0.9,
///   "transitions": [[[1.0, 0.0], [0.0, 1.0]], [[0.0, 1.0], [0.0, 1.0]]],
///   "rewards": [[1.0, 0.0], [0.0, 0.0]],
///   "terminal": [false, true],
///   "central_policy": [1, 0],
///   "independent_actions": [[true, false], [true, true]]
/// }
/// ```
///
/// `transitions[s][a][s']` is a probability row; `terminal`,
/// `central_policy` and `independent_actions` are optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FiniteMdp {
    pub states: usize,
    pub actions: usize,
    pub discount: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminal: Option<Vec<bool>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub central_policy: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub independent_actions: Option<Vec<Vec<bool>>>,
}

impl FiniteMdp {
    pub fn from_json_str(text: &str) -> Result<Self, OracleError> {
        let mdp: Self = serde_json::from_str(text)?;
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn load(path: &Path) -> Result<Self, OracleError> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        let bad = |msg: String| Err(OracleError::InvalidMdp(msg));
        if self.states == 0 || self.actions == 0 {
            return bad("need at least one state and one action".into());
        }
        if !(0.0..1.0).contains(&self.discount) {
            return bad(format!("discount {} outside [0, 1)", self.discount));
        }
        if self.transitions.len() != self.states || self.rewards.len() != self.states {
            return bad("transition and reward tables need one entry per state".into());
        }
        for s in 0..self.states {
            if self.transitions[s].len() != self.actions || self.rewards[s].len() != self.actions {
                return bad(format!("state {s} needs one entry per action"));
            }
            for (a, row) in self.transitions[s].iter().enumerate() {
                if row.len() != self.states {
                    return bad(format!("row ({s}, {a}) has {} entries", row.len()));
                }
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return bad(format!("row ({s}, {a}) has entries outside [0, 1]"));
                }
                let total: f64 = row.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return bad(format!("row ({s}, {a}) sums to {total}"));
                }
            }
            if self.rewards[s].iter().any(|r| !r.is_finite()) {
                return bad(format!("state {s} has a non-finite reward"));
            }
        }
        if let Some(t) = &self.terminal {
            if t.len() != self.states {
                return bad("terminal flags need one entry per state".into());
            }
        }
        if let Some(p) = &self.central_policy {
            self.check_policy(p)?;
        }
        if let Some(mask) = &self.independent_actions {
            if mask.len() != self.states
                || mask.iter().any(|row| row.len() != self.actions || !row.contains(&true))
            {
                return bad("independent_actions needs, per state, one flag per action with at least one set".into());
            }
        }
        Ok(())
    }

    pub fn check_policy(&self, policy: &[usize]) -> Result<(), OracleError> {
        if policy.len() != self.states || policy.iter().any(|&a| a >= self.actions) {
            return Err(OracleError::InvalidMdp(
                "central policy needs one valid action per state".into(),
            ));
        }
        Ok(())
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal.as_ref().is_some_and(|t| t[s])
    }

    /// Whether joint action `a` is available at `s` without intervening.
    pub fn independent(&self, s: usize, a: usize) -> bool {
        self.independent_actions.as_ref().is_none_or(|m| m[s][a])
    }

    /// `R(s, a) + γ Σ_s' P(s' | s, a) v(s')`.
    pub fn backup_value(&self, s: usize, a: usize, values: &[f64]) -> f64 {
        let expected: f64 = self.transitions[s][a]
            .iter()
            .zip(values)
            .map(|(p, v)| p * v)
            .sum();
        self.rewards[s][a] + self.discount * expected
    }

    /// A random fixture with Dirichlet-like transition rows and rewards in
    /// `[-1, 1]`.
    pub fn random<R: Rng>(rng: &mut R, states: usize, actions: usize, discount: f64) -> Self {
        let transitions = (0..states)
            .map(|_| {
                (0..actions)
                    .map(|_| {
                        let raw: Vec<f64> = (0..states).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
                        let total: f64 = raw.iter().sum();
                        let mut row: Vec<f64> = raw.iter().map(|x| x / total).collect();
                        // make the row sum to one exactly
                        let rest: f64 = row[1..].iter().sum();
                        row[0] = (1.0 - rest).max(0.0);
                        row
                    })
                    .collect()
            })
            .collect();
        let rewards = (0..states)
            .map(|_| (0..actions).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        Self {
            states,
            actions,
            discount,
            transitions,
            rewards,
            terminal: None,
            central_policy: None,
            independent_actions: None,
        }
    }

    /// Uniformly random deterministic central policy.
    pub fn random_policy<R: Rng>(&self, rng: &mut R) -> Vec<usize> {
        (0..self.states).map(|_| rng.gen_range(0..self.actions)).collect()
    }

    /// Removes the central action from the independently available set at
    /// each state with probability `p` (other actions stay available).
    pub fn with_pruned_central_actions<R: Rng>(mut self, central: &[usize], p: f64, rng: &mut R) -> Self {
        let mask = (0..self.states)
            .map(|s| {
                (0..self.actions)
                    .map(|a| !(a == central[s] && self.actions > 1 && rng.gen_bool(p)))
                    .collect()
            })
            .collect();
        self.independent_actions = Some(mask);
        self
    }
}
