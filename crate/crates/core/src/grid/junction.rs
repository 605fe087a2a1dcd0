//! Two one-lane roads crossing at a single cell.
//!
//! Each agent drives along its own road of `2 * arm_length + 1` cells,
//! starting at position 0. The intersection is position `arm_length` on both
//! roads and the far end is `2 * arm_length`. An agent only observes its own
//! position, so avoiding a collision needs information it does not have.
//!
//! The global state key is `p0 * (2 * arm_length + 1) + p1`.

use serde::{Deserialize, Serialize};

use crate::env::{check_joint_action, EnvError, EnvSpec, Environment, Observation, StateKey, StepOutcome};

pub const GAS: usize = 0;
pub const BRAKE: usize = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JunctionConfig {
    #[serde(default = "default_arm")]
    pub arm_length: usize,
    #[serde(default = "default_collision")]
    pub collision_penalty: f64,
    #[serde(default = "default_arrival")]
    pub arrival_reward: f64,
    #[serde(default = "default_step_penalty")]
    pub step_penalty: f64,
    #[serde(default = "default_limit")]
    pub episode_limit: usize,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

fn default_arm() -> usize {
    4
}
fn default_collision() -> f64 {
    -5.0
}
fn default_arrival() -> f64 {
    1.0
}
fn default_step_penalty() -> f64 {
    -0.01
}
fn default_limit() -> usize {
    30
}
fn default_discount() -> f64 {
    0.99
}

impl Default for JunctionConfig {
    fn default() -> Self {
        Self {
            arm_length: default_arm(),
            collision_penalty: default_collision(),
            arrival_reward: default_arrival(),
            step_penalty: default_step_penalty(),
            episode_limit: default_limit(),
            discount: default_discount(),
        }
    }
}

impl JunctionConfig {
    pub fn road_cells(&self) -> usize {
        2 * self.arm_length + 1
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        if self.arm_length < 2 {
            return Err(EnvError::Config("arm_length must be at least 2".into()));
        }
        if self.collision_penalty > 0.0 || !self.collision_penalty.is_finite() {
            return Err(EnvError::Config("collision_penalty must be <= 0".into()));
        }
        if self.arrival_reward < 0.0 || !self.arrival_reward.is_finite() {
            return Err(EnvError::Config("arrival_reward must be >= 0".into()));
        }
        if !self.step_penalty.is_finite() {
            return Err(EnvError::Config("step_penalty must be finite".into()));
        }
        if self.episode_limit == 0 {
            return Err(EnvError::Config("episode_limit must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(EnvError::Config("discount outside [0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct JunctionState {
    pub positions: [usize; 2],
    pub step_count: usize,
    pub collided: bool,
}

#[derive(Debug, Clone)]
pub struct JunctionEnv {
    config: JunctionConfig,
    spec: EnvSpec,
    state: Option<JunctionState>,
    terminal: bool,
}

impl JunctionEnv {
    pub fn new(config: JunctionConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let cells = config.road_cells() as u64;
        let spec = EnvSpec {
            name: format!("junction-{}", config.arm_length),
            n_agents: 2,
            action_counts: vec![2, 2],
            state_count: Some(cells * cells),
            episode_limit: config.episode_limit,
            discount: config.discount,
        };
        Ok(Self {
            config,
            spec,
            state: None,
            terminal: false,
        })
    }

    pub fn config(&self) -> &JunctionConfig {
        &self.config
    }

    pub fn state(&self) -> Option<&JunctionState> {
        self.state.as_ref()
    }

    fn end(&self) -> usize {
        2 * self.config.arm_length
    }

    fn observations(&self, state: &JunctionState) -> Vec<Observation> {
        state.positions.iter().map(|&p| vec![p as u16]).collect()
    }

    /// Intersection-relative coordinates `(p0 - arm, p1 - arm)` of a key.
    pub fn relative_position(&self, key: StateKey) -> (i64, i64) {
        let cells = self.config.road_cells() as u64;
        let arm = self.config.arm_length as i64;
        ((key / cells) as i64 - arm, (key % cells) as i64 - arm)
    }

    /// Chebyshev distance of a state from the intersection.
    pub fn distance_to_intersection(&self, key: StateKey) -> u64 {
        let (x, y) = self.relative_position(key);
        x.unsigned_abs().max(y.unsigned_abs())
    }
}

impl Environment for JunctionEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _seed: u64) -> (StateKey, Vec<Observation>) {
        let state = JunctionState {
            positions: [0, 0],
            step_count: 0,
            collided: false,
        };
        self.state = Some(state);
        self.terminal = false;
        (self.state_key(), self.observations(&state))
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome, EnvError> {
        let mut state = self.state.ok_or(EnvError::NotReset)?;
        if self.terminal {
            return Err(EnvError::Terminal);
        }
        check_joint_action(&self.spec, joint_action)?;
        let end = self.end();
        let arm = self.config.arm_length;
        let mut rewards = [0.0; 2];
        for (i, &a) in joint_action.iter().enumerate() {
            let p = state.positions[i];
            if p == end {
                continue;
            }
            rewards[i] += self.config.step_penalty;
            if a == GAS {
                state.positions[i] = p + 1;
                if p + 1 == end {
                    rewards[i] += self.config.arrival_reward;
                }
            }
        }
        state.step_count += 1;
        let (team_reward, agent_rewards) = if state.positions == [arm, arm] {
            state.collided = true;
            let half = self.config.collision_penalty / 2.0;
            (self.config.collision_penalty, vec![half, half])
        } else {
            (rewards[0] + rewards[1], rewards.to_vec())
        };
        let terminal = state.collided
            || state.positions == [end, end]
            || state.step_count >= self.config.episode_limit;
        self.state = Some(state);
        self.terminal = terminal;
        Ok(StepOutcome {
            team_reward,
            agent_rewards: Some(agent_rewards),
            next_state: self.state_key(),
            observations: self.observations(&state),
            terminal,
        })
    }

    fn state_key(&self) -> StateKey {
        let s = self.state.expect("state requested before reset");
        (s.positions[0] * self.config.road_cells() + s.positions[1]) as u64
    }

    fn focal_cell(&self, state: StateKey) -> Option<(i64, i64)> {
        Some(self.relative_position(state))
    }

    fn max_return(&self) -> f64 {
        let arm = self.config.arm_length as f64;
        2.0 * (self.config.arrival_reward + 2.0 * arm * self.config.step_penalty)
    }
}
