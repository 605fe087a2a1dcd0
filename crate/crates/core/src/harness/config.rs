//! Run configuration. JSON with sections `env`, `learners`, `global`,
//! `budget`, `schedule` and `output`; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::env::{AlphaGameSpec, Environment, MatrixGame};
use crate::grid::{JunctionConfig, JunctionEnv, LbfConfig, LbfEnv};
use crate::learners::LinearSchedule;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub env: EnvConfig,
    #[serde(default)]
    pub learners: LearnerConfig,
    #[serde(default)]
    pub global: GlobalConfig,
    #[serde(default)]
    pub budget: Option<BudgetConfig>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EnvConfig {
    Assurance {
        alpha: f64,
        #[serde(default)]
        reward_noise: f64,
    },
    Nonmonotonic {
        alpha: f64,
        #[serde(default)]
        reward_noise: f64,
    },
    Lbf(LbfConfig),
    Junction(JunctionConfig),
}

impl EnvConfig {
    pub fn build(&self) -> Result<Box<dyn Environment>, HarnessError> {
        Ok(match self {
            Self::Assurance { alpha, reward_noise } => {
                Box::new(MatrixGame::new(AlphaGameSpec::assurance(*alpha)?).with_reward_noise(*reward_noise))
            }
            Self::Nonmonotonic { alpha, reward_noise } => {
                Box::new(MatrixGame::new(AlphaGameSpec::nonmonotonic(*alpha)?).with_reward_noise(*reward_noise))
            }
            Self::Lbf(c) => Box::new(LbfEnv::new(c.clone())?),
            Self::Junction(c) => Box::new(JunctionEnv::new(c.clone())?),
        })
    }

    /// Sets the coupling parameter of a matrix game.
    pub fn set_alpha(&mut self, value: f64) -> Result<(), HarnessError> {
        match self {
            Self::Assurance { alpha, .. } | Self::Nonmonotonic { alpha, .. } => {
                *alpha = value;
                Ok(())
            }
            _ => Err(HarnessError::Config("alpha only applies to matrix games".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Decay {
    pub start: f64,
    pub end: f64,
    /// Share of `total_steps` over which the value decays linearly.
    pub fraction: f64,
}

impl Decay {
    pub fn schedule(&self, total_steps: u64) -> LinearSchedule {
        LinearSchedule::new(self.start, self.end, (self.fraction * total_steps as f64).round() as u64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub iql_lr: f64,
    /// Initial value of unseen independent table entries.
    pub iql_init: f64,
    pub central_lr: f64,
    pub epsilon: Decay,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            iql_lr: 0.1,
            iql_init: 0.0,
            central_lr: 0.1,
            epsilon: Decay {
                start: 1.0,
                end: 0.05,
                fraction: 0.5,
            },
        }
    }
}

/// How the switch decision is made each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SwitchMode {
    Learned,
    /// Fair coin every step.
    Random,
    AlwaysIndependent,
    AlwaysCentral,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GlobalConfig {
    pub switching_cost: f64,
    pub lr: f64,
    pub temperature: Decay,
    pub mode: SwitchMode,
}

impl Default for GlobalConfig {
    fn default() -> Self {
        Self {
            switching_cost: 0.01,
            lr: 0.1,
            temperature: Decay {
                start: 1.0,
                end: 0.1,
                fraction: 0.5,
            },
            mode: SwitchMode::Learned,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScheduleConfig {
    pub total_steps: u64,
    pub warmup_steps: u64,
    pub update_every: u64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub eval_every: u64,
    pub eval_episodes: usize,
    pub seeds: Vec<u64>,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            total_steps: 20_000,
            warmup_steps: 1_000,
            update_every: 1,
            batch_size: 32,
            buffer_capacity: 50_000,
            eval_every: 1_000,
            eval_episodes: 20,
            seeds: vec![0, 1, 2],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub save_tables: bool,
    pub save_transitions: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            save_tables: true,
            save_transitions: true,
        }
    }
}

impl RunConfig {
    pub fn new(env: EnvConfig) -> Self {
        Self {
            env,
            learners: LearnerConfig::default(),
            global: GlobalConfig::default(),
            budget: None,
            schedule: ScheduleConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, HarnessError> {
        let config: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |msg: &str| Err(HarnessError::Config(msg.to_string()));
        self.env.build()?;
        let l = &self.learners;
        for (name, lr) in [("iql_lr", l.iql_lr), ("central_lr", l.central_lr), ("global lr", self.global.lr)] {
            if !(lr > 0.0 && lr <= 1.0) {
                return bad(&format!("{name} must lie in (0, 1]"));
            }
        }
        if !l.iql_init.is_finite() {
            return bad("iql_init must be finite");
        }
        check_decay(&l.epsilon, "epsilon", 0.0)?;
        check_decay(&self.global.temperature, "temperature", f64::MIN_POSITIVE)?;
        if l.epsilon.start > 1.0 || l.epsilon.end > 1.0 {
            return bad("epsilon must stay within [0, 1]");
        }
        if !(self.global.switching_cost >= 0.0 && self.global.switching_cost.is_finite()) {
            return bad("switching_cost must be finite and non-negative");
        }
        let s = &self.schedule;
        if s.total_steps == 0 || s.update_every == 0 || s.batch_size == 0 || s.buffer_capacity == 0 {
            return bad("total_steps, update_every, batch_size and buffer_capacity must be positive");
        }
        if s.eval_every == 0 || s.eval_episodes == 0 {
            return bad("eval_every and eval_episodes must be positive");
        }
        let mut seeds = s.seeds.clone();
        seeds.sort_unstable();
        seeds.dedup();
        if seeds.len() != s.seeds.len() {
            return bad("seeds must be distinct");
        }
        Ok(())
    }
}

fn check_decay(d: &Decay, name: &str, lower: f64) -> Result<(), HarnessError> {
    if !(d.start >= lower && d.end >= lower && d.start.is_finite() && d.end.is_finite()) {
        return Err(HarnessError::Config(format!("{name} schedule out of range")));
    }
    if !(0.0..=1.0).contains(&d.fraction) {
        return Err(HarnessError::Config(format!("{name} fraction must lie in [0, 1]")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_takes_defaults() {
        let c = RunConfig::from_json_str(r#"{"env": {"kind": "assurance", "alpha": 0.5}}"#).unwrap();
        assert_eq!(c.global.switching_cost, 0.01);
        assert_eq!(c.schedule.buffer_capacity, 50_000);
        assert_eq!(c.budget, None);
        let back = RunConfig::from_json_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn grid_envs_parse() {
        let c = RunConfig::from_json_str(
            r#"{"env": {"kind": "lbf", "width": 5, "height": 5, "n_players": 2, "n_foods": 1,
                        "max_player_level": 1, "coop": true},
                "budget": {"total": 40}}"#,
        )
        .unwrap();
        assert!(matches!(c.env, EnvConfig::Lbf(ref l) if l.coop && l.sight == 2));
        assert_eq!(c.budget, Some(BudgetConfig { total: 40 }));
        let j = RunConfig::from_json_str(r#"{"env": {"kind": "junction", "arm_length": 3}}"#).unwrap();
        assert!(matches!(j.env, EnvConfig::Junction(ref c) if c.arm_length == 3));
    }

    #[test]
    fn unknown_keys_are_errors() {
        for text in [
            r#"{"env": {"kind": "assurance", "alpha": 0.5}, "extra": 1}"#,
            r#"{"env": {"kind": "assurance", "alpha": 0.5, "beta": 1}}"#,
            r#"{"env": {"kind": "junction", "lanes": 2}}"#,
            r#"{"env": {"kind": "assurance", "alpha": 0.5}, "global": {"cost": 1}}"#,
            r#"{"env": {"kind": "assurance", "alpha": 0.5}, "schedule": {"steps": 1}}"#,
        ] {
            assert!(RunConfig::from_json_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn invalid_values_are_errors() {
        for text in [
            r#"{"env": {"kind": "assurance", "alpha": 1.5}}"#,
            r#"{"env": {"kind": "assurance", "alpha": 0.5}, "schedule": {"seeds": [1, 1]}}"#,
            r#"{"env": {"kind": "assurance", "alpha": 0.5}, "global": {"switching_cost": -1}}"#,
            r#"{"env": {"kind": "assurance", "alpha": 0.5},
                "global": {"temperature": {"start": 1, "end": 0, "fraction": 0.5}}}"#,
            r#"{"env": {"kind": "lbf", "width": 1, "height": 1, "n_players": 2, "n_foods": 1,
                        "max_player_level": 1, "coop": true}}"#,
        ] {
            assert!(RunConfig::from_json_str(text).is_err(), "{text}");
        }
    }

    #[test]
    fn decay_spans_a_share_of_the_run() {
        let d = Decay {
            start: 1.0,
            end: 0.1,
            fraction: 0.5,
        };
        let s = d.schedule(1000);
        assert_eq!(s.decay_steps, 500);
        assert_eq!(s.value(500), 0.1);
    }
}
