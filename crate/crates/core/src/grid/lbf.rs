//! Level-based foraging.
//!
//! Players and foods sit on distinct cells of a `width × height` grid. A food
//! is collected when the summed level of the orthogonally adjacent players
//! that chose `Load` this step reaches the food's level. The team reward for
//! a step is the collected food level divided by the total initial food
//! level, so a full episode returns at most 1.
//!
//! # State key
//!
//! The global state key is a mixed-radix integer built, most significant
//! first, from
//!
//! * each player in index order: `cell * L + (level - 1)` in radix
//!   `W * H * L`, with `cell = y * W + x` and `L = max_player_level`;
//! * each food in index order: `0` if collected, otherwise
//!   `1 + cell * F + (level - 1)` in radix `1 + W * H * F`, where `F` is the
//!   largest food level the configuration can spawn.
//!
//! The step counter is not part of the key.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::env::{check_joint_action, EnvError, EnvSpec, Environment, Observation, StateKey, StepOutcome};

/// Per-agent actions, in index order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LbfAction {
    Up = 0,
    Down = 1,
    Left = 2,
    Right = 3,
    Load = 4,
    Noop = 5,
}

impl LbfAction {
    pub const COUNT: usize = 6;

    pub fn from_index(i: usize) -> Option<Self> {
        Some(match i {
            0 => Self::Up,
            1 => Self::Down,
            2 => Self::Left,
            3 => Self::Right,
            4 => Self::Load,
            5 => Self::Noop,
            _ => return None,
        })
    }

    fn delta(self) -> Option<(i64, i64)> {
        match self {
            Self::Up => Some((0, -1)),
            Self::Down => Some((0, 1)),
            Self::Left => Some((-1, 0)),
            Self::Right => Some((1, 0)),
            Self::Load | Self::Noop => None,
        }
    }
}

/// Cell classes used in observation windows.
pub const CELL_EMPTY: u16 = 0;
pub const CELL_PLAYER: u16 = 1;
pub const CELL_FOOD: u16 = 2;
pub const CELL_WALL: u16 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LbfConfig {
    pub width: usize,
    pub height: usize,
    pub n_players: usize,
    pub n_foods: usize,
    pub max_player_level: u16,
    pub coop: bool,
    #[serde(default = "default_sight")]
    pub sight: usize,
    #[serde(default = "default_episode_limit")]
    pub episode_limit: usize,
    #[serde(default = "default_discount")]
    pub discount: f64,
}

fn default_sight() -> usize {
    2
}
fn default_episode_limit() -> usize {
    50
}
fn default_discount() -> f64 {
    0.99
}

impl LbfConfig {
    pub fn new(width: usize, height: usize, n_players: usize, n_foods: usize, coop: bool) -> Self {
        Self {
            width,
            height,
            n_players,
            n_foods,
            max_player_level: 1,
            coop,
            sight: default_sight(),
            episode_limit: default_episode_limit(),
            discount: default_discount(),
        }
    }

    pub fn name(&self) -> String {
        format!(
            "Foraging-{}x{}-{}p-{}f{}",
            self.width,
            self.height,
            self.n_players,
            self.n_foods,
            if self.coop { "-coop" } else { "" }
        )
    }

    /// Largest food level this configuration can spawn.
    pub fn max_food_level(&self) -> u16 {
        if self.coop {
            self.max_player_level + 1
        } else {
            self.max_player_level
        }
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let cells = self.width * self.height;
        if self.width == 0 || self.height == 0 {
            return Err(EnvError::Config("grid must be non-empty".into()));
        }
        if self.n_players < 2 || self.n_foods == 0 {
            return Err(EnvError::Config(
                "need at least 2 players and 1 food".into(),
            ));
        }
        if self.n_players + self.n_foods > cells {
            return Err(EnvError::Config(format!(
                "{} players and {} foods do not fit on {} cells",
                self.n_players, self.n_foods, cells
            )));
        }
        if self.max_player_level == 0 {
            return Err(EnvError::Config("levels start at 1".into()));
        }
        if self.episode_limit == 0 {
            return Err(EnvError::Config("episode_limit must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.discount) {
            return Err(EnvError::Config("discount outside [0, 1)".into()));
        }
        self.state_radix()?;
        Ok(())
    }

    fn state_radix(&self) -> Result<u64, EnvError> {
        let cells = (self.width * self.height) as u64;
        let player = cells * u64::from(self.max_player_level);
        let food = 1 + cells * u64::from(self.max_food_level());
        let mut total: u64 = 1;
        for _ in 0..self.n_players {
            total = total.checked_mul(player).ok_or_else(too_large)?;
        }
        for _ in 0..self.n_foods {
            total = total.checked_mul(food).ok_or_else(too_large)?;
        }
        Ok(total)
    }
}

fn too_large() -> EnvError {
    EnvError::Config("state space too large for a 64-bit dense key".into())
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Player {
    pub pos: (usize, usize),
    pub level: u16,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Food {
    pub pos: (usize, usize),
    pub level: u16,
    pub collected: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LbfState {
    pub players: Vec<Player>,
    pub foods: Vec<Food>,
    pub step_count: usize,
}

impl LbfState {
    fn player_at(&self, pos: (usize, usize)) -> Option<&Player> {
        self.players.iter().find(|p| p.pos == pos)
    }

    fn food_at(&self, pos: (usize, usize)) -> Option<&Food> {
        self.foods.iter().find(|f| !f.collected && f.pos == pos)
    }

    pub fn all_collected(&self) -> bool {
        self.foods.iter().all(|f| f.collected)
    }
}

/// Draws an initial layout for `config` from `seed`.
pub fn lbf_reset(config: &LbfConfig, seed: u64) -> Result<LbfState, EnvError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cells: Vec<(usize, usize)> = (0..config.height)
        .flat_map(|y| (0..config.width).map(move |x| (x, y)))
        .collect();
    cells.shuffle(&mut rng);
    let players: Vec<Player> = cells[..config.n_players]
        .iter()
        .map(|&pos| Player {
            pos,
            level: rng.gen_range(1..=config.max_player_level),
        })
        .collect();
    let top = players.iter().map(|p| p.level).max().unwrap_or(1);
    let foods = cells[config.n_players..config.n_players + config.n_foods]
        .iter()
        .map(|&pos| Food {
            pos,
            level: if config.coop {
                // One level above the strongest player: nobody loads it alone.
                top + 1
            } else {
                rng.gen_range(1..=config.max_player_level)
            },
            collected: false,
        })
        .collect();
    Ok(LbfState {
        players,
        foods,
        step_count: 0,
    })
}

pub struct LbfStepResult {
    pub state: LbfState,
    pub team_reward: f64,
    pub agent_rewards: Vec<f64>,
    pub terminal: bool,
}

/// Pure transition function.
pub fn lbf_step(config: &LbfConfig, state: &LbfState, joint_action: &[LbfAction]) -> LbfStepResult {
    let mut next = state.clone();
    let in_grid = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < config.width && (y as usize) < config.height
    };

    let targets: Vec<Option<(usize, usize)>> = state
        .players
        .iter()
        .zip(joint_action)
        .map(|(p, a)| {
            let (dx, dy) = a.delta()?;
            let (x, y) = (p.pos.0 as i64 + dx, p.pos.1 as i64 + dy);
            if !in_grid(x, y) {
                return None;
            }
            let cell = (x as usize, y as usize);
            if state.player_at(cell).is_some() || state.food_at(cell).is_some() {
                return None;
            }
            Some(cell)
        })
        .collect();
    for (i, target) in targets.iter().enumerate() {
        if let Some(cell) = target {
            let contested = targets
                .iter()
                .enumerate()
                .any(|(j, t)| j != i && t.as_ref() == Some(cell));
            if !contested {
                next.players[i].pos = *cell;
            }
        }
    }

    let total_food: f64 = state.foods.iter().map(|f| f64::from(f.level)).sum();
    let mut agent_rewards = vec![0.0; state.players.len()];
    let mut team_reward = 0.0;
    for food in next.foods.iter_mut().filter(|f| !f.collected) {
        let loaders: Vec<usize> = next
            .players
            .iter()
            .enumerate()
            .filter(|(i, p)| joint_action[*i] == LbfAction::Load && adjacent(p.pos, food.pos))
            .map(|(i, _)| i)
            .collect();
        let loader_level: u16 = loaders.iter().map(|&i| next.players[i].level).sum();
        if !loaders.is_empty() && loader_level >= food.level {
            food.collected = true;
            let value = f64::from(food.level) / total_food;
            team_reward += value;
            for &i in &loaders {
                agent_rewards[i] +=
                    value * f64::from(next.players[i].level) / f64::from(loader_level);
            }
        }
    }
    next.step_count += 1;
    let terminal = next.all_collected() || next.step_count >= config.episode_limit;
    LbfStepResult {
        state: next,
        team_reward,
        agent_rewards,
        terminal,
    }
}

fn adjacent(a: (usize, usize), b: (usize, usize)) -> bool {
    a.0.abs_diff(b.0) + a.1.abs_diff(b.1) == 1
}

/// Encodes the `(2 * sight + 1)^2` window around `agent`, row-major, as
/// `(class, level)` pairs followed by the agent's own level.
pub fn lbf_observe(config: &LbfConfig, state: &LbfState, agent: usize) -> Observation {
    let me = &state.players[agent];
    let r = config.sight as i64;
    let mut obs = Vec::with_capacity(2 * (2 * config.sight + 1).pow(2) + 1);
    for dy in -r..=r {
        for dx in -r..=r {
            let (x, y) = (me.pos.0 as i64 + dx, me.pos.1 as i64 + dy);
            if x < 0 || y < 0 || x as usize >= config.width || y as usize >= config.height {
                obs.extend([CELL_WALL, 0]);
                continue;
            }
            let cell = (x as usize, y as usize);
            if let Some(p) = state.player_at(cell) {
                obs.extend([CELL_PLAYER, p.level]);
            } else if let Some(f) = state.food_at(cell) {
                obs.extend([CELL_FOOD, f.level]);
            } else {
                obs.extend([CELL_EMPTY, 0]);
            }
        }
    }
    obs.push(me.level);
    obs
}

pub fn lbf_state_key(config: &LbfConfig, state: &LbfState) -> StateKey {
    let cells = (config.width * config.height) as u64;
    let player_radix = cells * u64::from(config.max_player_level);
    let food_levels = u64::from(config.max_food_level());
    let food_radix = 1 + cells * food_levels;
    let cell = |(x, y): (usize, usize)| (y * config.width + x) as u64;
    let mut key = 0u64;
    for p in &state.players {
        key = key * player_radix + cell(p.pos) * u64::from(config.max_player_level) + u64::from(p.level - 1);
    }
    for f in &state.foods {
        let digit = if f.collected {
            0
        } else {
            1 + cell(f.pos) * food_levels + u64::from(f.level - 1)
        };
        key = key * food_radix + digit;
    }
    key
}

/// Position of player 0 encoded in `key`.
pub fn lbf_first_player_cell(config: &LbfConfig, key: StateKey) -> (usize, usize) {
    let cells = (config.width * config.height) as u64;
    let player_radix = cells * u64::from(config.max_player_level);
    let food_radix = 1 + cells * u64::from(config.max_food_level());
    let mut rest = key;
    for _ in 0..config.n_foods {
        rest /= food_radix;
    }
    for _ in 1..config.n_players {
        rest /= player_radix;
    }
    let cell = (rest / u64::from(config.max_player_level)) as usize;
    (cell % config.width, cell / config.width)
}

/// [`Environment`] wrapper around the pure LBF functions.
#[derive(Debug, Clone)]
pub struct LbfEnv {
    config: LbfConfig,
    spec: EnvSpec,
    state: Option<LbfState>,
    terminal: bool,
}

impl LbfEnv {
    pub fn new(config: LbfConfig) -> Result<Self, EnvError> {
        config.validate()?;
        let spec = EnvSpec {
            name: config.name(),
            n_agents: config.n_players,
            action_counts: vec![LbfAction::COUNT; config.n_players],
            state_count: Some(config.state_radix()?),
            episode_limit: config.episode_limit,
            discount: config.discount,
        };
        spec.validate()?;
        Ok(Self {
            config,
            spec,
            state: None,
            terminal: false,
        })
    }

    pub fn config(&self) -> &LbfConfig {
        &self.config
    }

    pub fn state(&self) -> Option<&LbfState> {
        self.state.as_ref()
    }

    /// Replaces the current state; used by tests and replay tooling.
    pub fn set_state(&mut self, state: LbfState) {
        self.terminal = state.all_collected() || state.step_count >= self.config.episode_limit;
        self.state = Some(state);
    }

    pub fn observations(&self) -> Vec<Observation> {
        let state = self.state.as_ref().expect("observations requested before reset");
        (0..self.config.n_players)
            .map(|i| lbf_observe(&self.config, state, i))
            .collect()
    }
}

impl Environment for LbfEnv {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> (StateKey, Vec<Observation>) {
        let state = lbf_reset(&self.config, seed).expect("configuration validated at construction");
        self.state = Some(state);
        self.terminal = false;
        (self.state_key(), self.observations())
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome, EnvError> {
        let state = self.state.as_ref().ok_or(EnvError::NotReset)?;
        if self.terminal {
            return Err(EnvError::Terminal);
        }
        check_joint_action(&self.spec, joint_action)?;
        let actions: Vec<LbfAction> = joint_action
            .iter()
            .map(|&a| LbfAction::from_index(a).expect("range checked"))
            .collect();
        let result = lbf_step(&self.config, state, &actions);
        self.state = Some(result.state);
        self.terminal = result.terminal;
        Ok(StepOutcome {
            team_reward: result.team_reward,
            agent_rewards: Some(result.agent_rewards),
            next_state: self.state_key(),
            observations: self.observations(),
            terminal: result.terminal,
        })
    }

    fn state_key(&self) -> StateKey {
        lbf_state_key(&self.config, self.state.as_ref().expect("state requested before reset"))
    }

    fn focal_cell(&self, state: StateKey) -> Option<(i64, i64)> {
        let (x, y) = lbf_first_player_cell(&self.config, state);
        Some((x as i64, y as i64))
    }

    fn max_return(&self) -> f64 {
        1.0
    }
}
