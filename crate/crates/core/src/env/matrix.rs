//! Two-player 2×2 team games whose payoff interpolates between a coupled
//! game and a decoupled one.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{check_joint_action, EnvError, EnvSpec, Environment, Observation, StateKey, StepOutcome};

/// Team payoff, rows indexed by agent 1's action and columns by agent 2's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PayoffMatrix {
    pub entries: [[f64; 2]; 2],
}

impl PayoffMatrix {
    pub const fn new(entries: [[f64; 2]; 2]) -> Self {
        Self { entries }
    }

    /// Builds a matrix from nested rows, rejecting anything other than 2×2.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self, EnvError> {
        if rows.len() != 2 || rows.iter().any(|r| r.len() != 2) {
            let shape: Vec<usize> = rows.iter().map(Vec::len).collect();
            return Err(EnvError::Config(format!(
                "payoff matrix must be 2x2, got row lengths {shape:?}"
            )));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(EnvError::Config("payoff entries must be finite".into()));
        }
        Ok(Self::new([[rows[0][0], rows[0][1]], [rows[1][0], rows[1][1]]]))
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row][col]
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries[0][1] == self.entries[1][0]
    }

    /// `alpha * decoupled + (1 - alpha) * coupled`, entrywise.
    pub fn compose(coupled: &Self, decoupled: &Self, alpha: f64) -> Result<Self, EnvError> {
        check_alpha(alpha)?;
        let mut entries = [[0.0; 2]; 2];
        for (i, row) in entries.iter_mut().enumerate() {
            for (j, e) in row.iter_mut().enumerate() {
                *e = alpha * decoupled.entries[i][j] + (1.0 - alpha) * coupled.entries[i][j];
            }
        }
        Ok(Self { entries })
    }

    pub fn max_entry(&self) -> f64 {
        self.entries
            .iter()
            .flatten()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

fn check_alpha(alpha: f64) -> Result<(), EnvError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(EnvError::Config(format!("alpha {alpha} outside [0, 1]")))
    }
}

/// Coupled part of the assurance game.
pub const ASSURANCE_COUPLED: PayoffMatrix = PayoffMatrix::new([[5.0, 0.0], [0.0, -2.0]]);
/// Decoupled part of the assurance game: every joint action pays 10.
pub const ASSURANCE_DECOUPLED: PayoffMatrix = PayoffMatrix::new([[10.0, 10.0], [10.0, 10.0]]);
/// Non-monotonic team game endpoints; only the (A, A) entry moves with alpha.
pub const NONMONOTONIC_AT_ZERO: PayoffMatrix = PayoffMatrix::new([[0.0, 1.0], [1.0, 8.0]]);
pub const NONMONOTONIC_AT_ONE: PayoffMatrix = PayoffMatrix::new([[2.0, 1.0], [1.0, 8.0]]);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GameKind {
    Assurance,
    Nonmonotonic,
    CustomComposed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaGameSpec {
    pub kind: GameKind,
    pub alpha: f64,
    pub coupled: PayoffMatrix,
    pub decoupled: PayoffMatrix,
}

impl AlphaGameSpec {
    pub fn assurance(alpha: f64) -> Result<Self, EnvError> {
        check_alpha(alpha)?;
        Ok(Self {
            kind: GameKind::Assurance,
            alpha,
            coupled: ASSURANCE_COUPLED,
            decoupled: ASSURANCE_DECOUPLED,
        })
    }

    pub fn nonmonotonic(alpha: f64) -> Result<Self, EnvError> {
        check_alpha(alpha)?;
        Ok(Self {
            kind: GameKind::Nonmonotonic,
            alpha,
            coupled: NONMONOTONIC_AT_ZERO,
            decoupled: NONMONOTONIC_AT_ONE,
        })
    }

    pub fn custom(coupled: PayoffMatrix, decoupled: PayoffMatrix, alpha: f64) -> Result<Self, EnvError> {
        check_alpha(alpha)?;
        Ok(Self {
            kind: GameKind::CustomComposed,
            alpha,
            coupled,
            decoupled,
        })
    }

    pub fn payoff(&self) -> PayoffMatrix {
        // alpha was validated at construction
        PayoffMatrix::compose(&self.coupled, &self.decoupled, self.alpha)
            .expect("alpha checked at construction")
    }

    pub fn name(&self) -> String {
        let kind = match self.kind {
            GameKind::Assurance => "assurance",
            GameKind::Nonmonotonic => "nonmonotonic",
            GameKind::CustomComposed => "custom",
        };
        format!("{kind}(alpha={})", self.alpha)
    }
}

/// One-state, one-step matrix game. Each episode is a single joint action.
#[derive(Debug, Clone)]
pub struct MatrixGame {
    spec: EnvSpec,
    game: AlphaGameSpec,
    payoff: PayoffMatrix,
    noise_std: f64,
    rng: ChaCha8Rng,
    phase: Phase,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Fresh,
    Ready,
    Done,
}

impl MatrixGame {
    pub fn new(game: AlphaGameSpec) -> Self {
        let payoff = game.payoff();
        Self {
            spec: EnvSpec {
                name: game.name(),
                n_agents: 2,
                action_counts: vec![2, 2],
                state_count: Some(1),
                episode_limit: 1,
                discount: 0.99,
            },
            game,
            payoff,
            noise_std: 0.0,
            rng: ChaCha8Rng::seed_from_u64(0),
            phase: Phase::Fresh,
        }
    }

    /// Adds zero-mean Gaussian noise with the given standard deviation to
    /// every reward. Off by default.
    pub fn with_reward_noise(mut self, std: f64) -> Self {
        self.noise_std = std.max(0.0);
        self
    }

    pub fn with_discount(mut self, discount: f64) -> Self {
        self.spec.discount = discount;
        self
    }

    pub fn payoff(&self) -> &PayoffMatrix {
        &self.payoff
    }

    pub fn game(&self) -> &AlphaGameSpec {
        &self.game
    }
}

pub fn build_assurance_game(alpha: f64) -> Result<MatrixGame, EnvError> {
    Ok(MatrixGame::new(AlphaGameSpec::assurance(alpha)?))
}

pub fn build_nonmonotonic_game(alpha: f64) -> Result<MatrixGame, EnvError> {
    Ok(MatrixGame::new(AlphaGameSpec::nonmonotonic(alpha)?))
}

impl Environment for MatrixGame {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> (StateKey, Vec<Observation>) {
        self.rng = ChaCha8Rng::seed_from_u64(seed);
        self.phase = Phase::Ready;
        (0, vec![Vec::new(), Vec::new()])
    }

    fn step(&mut self, joint_action: &[usize]) -> Result<StepOutcome, EnvError> {
        match self.phase {
            Phase::Fresh => return Err(EnvError::NotReset),
            Phase::Done => return Err(EnvError::Terminal),
            Phase::Ready => {}
        }
        check_joint_action(&self.spec, joint_action)?;
        let mut reward = self.payoff.get(joint_action[0], joint_action[1]);
        if self.noise_std > 0.0 {
            reward += self.noise_std * sample_standard_normal(&mut self.rng);
        }
        self.phase = Phase::Done;
        Ok(StepOutcome {
            team_reward: reward,
            agent_rewards: None,
            next_state: 0,
            observations: vec![Vec::new(), Vec::new()],
            terminal: true,
        })
    }

    fn state_key(&self) -> StateKey {
        0
    }

    fn max_return(&self) -> f64 {
        self.payoff.max_entry()
    }
}

/// Box-Muller draw from N(0, 1).
fn sample_standard_normal<R: Rng>(rng: &mut R) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
