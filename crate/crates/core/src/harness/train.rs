//! The training loop: each step the switch picks which learner acts, the
//! transition goes to the shared buffer, and all three learners update from
//! it on every update cycle.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{RunConfig, SwitchMode};
use super::HarnessError;
use crate::env::{flatten_joint_action, Environment, StateKey};
use crate::learners::{IndependentQ, MonotonicJointQ};
use crate::replay::{ObservationInterner, ReplayBuffer, TransitionRecord};
use crate::switch::{BudgetState, GlobalQ, CENTRAL, INDEPENDENT};

const ENV_STREAM: u64 = 1;
const ACT_STREAM: u64 = 2;
const GLOBAL_STREAM: u64 = 3;
const REPLAY_STREAM: u64 = 4;
const EVAL_STREAM: u64 = 5;

/// One evaluation row of the metrics CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub step: u64,
    pub episode: u64,
    pub seed: u64,
    pub eval_return: f64,
    pub cl_calls_cum: u64,
    pub cl_call_pct: f64,
    pub budget_remaining: Option<u64>,
    pub epsilon: f64,
    pub temperature: f64,
}

/// Compact per-step log kept alongside the replay buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionLog {
    pub step: u64,
    pub episode: u64,
    pub state: StateKey,
    pub joint_action: usize,
    pub switch: u8,
    pub reward: f64,
    pub next_state: StateKey,
    pub terminal: bool,
    pub budget_before: Option<u64>,
    pub budget_after: Option<u64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StateCounts {
    pub activations: u64,
    pub visits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapRow {
    pub state_key: StateKey,
    pub cell: Option<(i64, i64)>,
    pub activations: u64,
    pub visits: u64,
}

impl HeatmapRow {
    /// `activations / visits`, or 0 for unvisited states.
    pub fn rate(&self) -> f64 {
        if self.visits == 0 {
            0.0
        } else {
            self.activations as f64 / self.visits as f64
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: RunConfig,
    pub seed: u64,
    pub metrics: Vec<MetricsRecord>,
    pub transitions: Vec<TransitionLog>,
    pub heatmap: Vec<HeatmapRow>,
    pub iql: IndependentQ,
    pub central: MonotonicJointQ,
    pub global: GlobalQ,
    pub cl_calls: u64,
    pub budget: Option<BudgetState>,
    pub max_return: f64,
}

impl RunArtifacts {
    pub fn final_return(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.eval_return)
    }

    pub fn normalized_final_return(&self) -> f64 {
        self.final_return() / self.max_return
    }

    pub fn cl_call_pct(&self) -> f64 {
        self.metrics.last().map_or(0.0, |m| m.cl_call_pct)
    }

    /// Discounted objective of the switching controller, `Σ_t γ^t (r_t -
    /// c·g_t)` per episode, summed over all logged episodes.
    pub fn switching_objective(&self, gamma: f64) -> f64 {
        let c = self.global.switching_cost();
        let mut total = 0.0;
        let mut discount = 1.0;
        let mut episode = None;
        for t in &self.transitions {
            if episode != Some(t.episode) {
                episode = Some(t.episode);
                discount = 1.0;
            }
            total += discount * (t.reward - c * f64::from(t.switch));
            discount *= gamma;
        }
        total
    }
}

/// Greedy behaviour used for evaluation. The switch uses `g = 1` only when
/// its activation value strictly exceeds the alternative.
pub struct GreedyPolicy<'a> {
    pub iql: &'a IndependentQ,
    pub central: &'a MonotonicJointQ,
    pub global: &'a GlobalQ,
    pub mode: SwitchMode,
    /// Remaining budget at the start of each evaluation episode.
    pub budget: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean: f64,
    pub returns: Vec<f64>,
    pub activations: u64,
}

/// Runs `episodes` greedy episodes from reset seeds drawn from `seed`.
/// Budget spent during evaluation is a local copy and never touches the
/// training budget.
pub fn evaluate(
    policy: &GreedyPolicy<'_>,
    env: &mut dyn Environment,
    interner: &ObservationInterner,
    episodes: usize,
    seed: u64,
) -> EvalResult {
    assert!(episodes >= 1, "evaluation needs at least one episode");
    let mut seeds = ChaCha8Rng::seed_from_u64(seed);
    seeds.set_stream(EVAL_STREAM);
    let mut coin = seeds.clone();
    coin.set_stream(EVAL_STREAM + 1);
    let mut returns = Vec::with_capacity(episodes);
    let mut activations = 0;
    for _ in 0..episodes {
        let (mut state, mut obs) = env.reset(seeds.gen());
        let mut remaining = policy.budget;
        let mut ret = 0.0;
        loop {
            let masked = remaining == Some(0);
            let g = match policy.mode {
                _ if masked => INDEPENDENT,
                SwitchMode::Learned => policy.global.greedy(&policy.global.key(state, remaining)),
                SwitchMode::Random => u8::from(coin.gen::<bool>()),
                SwitchMode::AlwaysIndependent => INDEPENDENT,
                SwitchMode::AlwaysCentral => CENTRAL,
            };
            let joint = if g == CENTRAL {
                activations += 1;
                remaining = remaining.map(|x| x - 1);
                policy.central.greedy(state)
            } else {
                let keys: Vec<_> = obs.iter().map(|o| interner.lookup(o)).collect();
                policy.iql.greedy(&keys)
            };
            let out = env.step(&joint).expect("greedy actions are in range");
            ret += out.team_reward;
            state = out.next_state;
            obs = out.observations;
            if out.terminal {
                break;
            }
        }
        returns.push(ret);
    }
    let mean = returns.iter().sum::<f64>() / episodes as f64;
    EvalResult {
        mean,
        returns,
        activations,
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub fn train(config: &RunConfig, seed: u64) -> Result<RunArtifacts, HarnessError> {
    config.validate()?;
    let mut env = config.env.build()?;
    let mut eval_env = config.env.build()?;
    let spec = env.spec().clone();
    let sched = &config.schedule;
    let total = sched.total_steps;
    let epsilon = config.learners.epsilon.schedule(total);
    let temperature = config.global.temperature.schedule(total);

    let mut iql = IndependentQ::with_init(&spec.action_counts, config.learners.iql_lr, epsilon, config.learners.iql_init);
    let mut central = MonotonicJointQ::new(&spec.action_counts, config.learners.central_lr, epsilon);
    let mut global = GlobalQ::new(
        config.global.switching_cost,
        config.global.lr,
        temperature,
        config.budget.is_some(),
    );
    let mut budget = config.budget.map(|b| BudgetState::new(b.total));
    let mode = config.global.mode;

    let mut env_rng = stream(seed, ENV_STREAM);
    let mut act_rng = stream(seed, ACT_STREAM);
    let mut global_rng = stream(seed, GLOBAL_STREAM);
    let mut replay_rng = stream(seed, REPLAY_STREAM);

    let mut buffer = ReplayBuffer::new(sched.buffer_capacity);
    let mut interner = ObservationInterner::new();
    let mut counts: BTreeMap<StateKey, StateCounts> = BTreeMap::new();
    let mut metrics = Vec::new();
    let mut transitions = Vec::with_capacity(total as usize);
    let mut cl_calls = 0u64;
    let mut episode = 0u64;

    let (mut state, obs) = env.reset(env_rng.gen());
    let mut obs_keys = interner.intern_all(&obs);

    for t in 0..total {
        let eps = epsilon.value(t);
        let temp = temperature.value(t);
        let before = budget.map(|b| b.remaining);
        let masked = before == Some(0);
        let g = match mode {
            _ if masked => INDEPENDENT,
            SwitchMode::Learned => global.act(&global.key(state, before), temp, &mut global_rng),
            SwitchMode::Random => u8::from(global_rng.gen::<bool>()),
            SwitchMode::AlwaysIndependent => INDEPENDENT,
            SwitchMode::AlwaysCentral => CENTRAL,
        };
        if let Some(b) = budget.as_mut() {
            b.tick(g)?;
        }
        let after = budget.map(|b| b.remaining);
        let joint = if g == CENTRAL {
            central.act(state, eps, &mut act_rng)
        } else {
            iql.act(&obs_keys, eps, &mut act_rng)
        };
        let out = env.step(&joint)?;
        let next_keys = interner.intern_all(&out.observations);

        cl_calls += u64::from(g);
        let c = counts.entry(state).or_default();
        c.visits += 1;
        c.activations += u64::from(g);
        transitions.push(TransitionLog {
            step: t,
            episode,
            state,
            joint_action: flatten_joint_action(&spec.action_counts, &joint),
            switch: g,
            reward: out.team_reward,
            next_state: out.next_state,
            terminal: out.terminal,
            budget_before: before,
            budget_after: after,
        });
        buffer.push(TransitionRecord {
            state,
            observations: obs_keys,
            joint_action: joint,
            switch: g,
            reward: out.team_reward,
            next_state: out.next_state,
            next_observations: next_keys.clone(),
            terminal: out.terminal,
            budget_before: before,
            budget_after: after,
        });

        if out.terminal {
            episode += 1;
            let (s, o) = env.reset(env_rng.gen());
            state = s;
            obs_keys = interner.intern_all(&o);
        } else {
            state = out.next_state;
            obs_keys = next_keys;
        }

        if t >= sched.warmup_steps && t % sched.update_every == 0 {
            let batch = buffer.sample(sched.batch_size, &mut replay_rng);
            iql.update(batch.iter().copied(), spec.discount);
            central.update(batch.iter().copied(), spec.discount);
            global.update(batch.iter().copied(), spec.discount);
        }

        if let Some(b) = &budget {
            if cl_calls > b.total {
                return Err(HarnessError::BudgetBreach {
                    used: cl_calls,
                    total: b.total,
                });
            }
        }

        if (t + 1) % sched.eval_every == 0 || t + 1 == total {
            let policy = GreedyPolicy {
                iql: &iql,
                central: &central,
                global: &global,
                mode,
                budget: budget.map(|b| b.remaining),
            };
            let result = evaluate(&policy, eval_env.as_mut(), &interner, sched.eval_episodes, seed);
            metrics.push(MetricsRecord {
                step: t + 1,
                episode,
                seed,
                eval_return: result.mean,
                cl_calls_cum: cl_calls,
                cl_call_pct: 100.0 * cl_calls as f64 / (t + 1) as f64,
                budget_remaining: budget.map(|b| b.remaining),
                epsilon: epsilon.value(t + 1),
                temperature: temperature.value(t + 1),
            });
        }
    }

    let heatmap = counts
        .iter()
        .map(|(&key, c)| HeatmapRow {
            state_key: key,
            cell: env.focal_cell(key),
            activations: c.activations,
            visits: c.visits,
        })
        .collect();
    Ok(RunArtifacts {
        config: config.clone(),
        seed,
        metrics,
        transitions,
        heatmap,
        iql,
        central,
        global,
        cl_calls,
        budget,
        max_return: env.max_return(),
    })
}

/// Training with the switch replaced by a fair coin each step.
pub fn random_switch_baseline(config: &RunConfig, seed: u64) -> Result<RunArtifacts, HarnessError> {
    let mut config = config.clone();
    config.global.mode = SwitchMode::Random;
    train(&config, seed)
}
