//! The switching controller: a tabular Q-learner over `g ∈ {0, 1}` that pays
//! a fixed cost each time it hands control to the centralised learner, and
//! the activation budget that optionally augments its state.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::env::StateKey;
use crate::learners::{LinearSchedule, QTable};
use crate::replay::TransitionRecord;

pub const INDEPENDENT: u8 = 0;
pub const CENTRAL: u8 = 1;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BudgetError {
    #[error("activation with no budget left (total {total})")]
    Exhausted { total: u64 },
    #[error("switch decision must be 0 or 1, got {0}")]
    InvalidDecision(u8),
}

/// Remaining centralised activations for a whole training run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BudgetState {
    pub total: u64,
    pub remaining: u64,
}

impl BudgetState {
    pub fn new(total: u64) -> Self {
        Self {
            total,
            remaining: total,
        }
    }

    pub fn used(&self) -> u64 {
        self.total - self.remaining
    }

    /// Spends one activation when `g = 1`.
    pub fn tick(&mut self, g: u8) -> Result<(), BudgetError> {
        match g {
            INDEPENDENT => Ok(()),
            CENTRAL if self.remaining == 0 => Err(BudgetError::Exhausted { total: self.total }),
            CENTRAL => {
                self.remaining -= 1;
                Ok(())
            }
            other => Err(BudgetError::InvalidDecision(other)),
        }
    }
}

/// Key of the switching table: the global state, extended by the remaining
/// budget in budget mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct AugmentedKey {
    pub state: StateKey,
    pub remaining: Option<u64>,
}

impl fmt::Display for AugmentedKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.remaining {
            Some(x) => write!(f, "{}:{}", self.state, x),
            None => write!(f, "{}", self.state),
        }
    }
}

pub fn augment_state(state: StateKey, budget: Option<&BudgetState>) -> AugmentedKey {
    AugmentedKey {
        state,
        remaining: budget.map(|b| b.remaining),
    }
}

#[derive(Debug, Clone)]
pub struct GlobalQ {
    table: QTable<AugmentedKey>,
    switching_cost: f64,
    pub lr: f64,
    pub temperature: LinearSchedule,
    pub budget_mode: bool,
}

impl GlobalQ {
    /// Panics unless `switching_cost >= 0`; callers validate configuration.
    pub fn new(switching_cost: f64, lr: f64, temperature: LinearSchedule, budget_mode: bool) -> Self {
        assert!(switching_cost >= 0.0, "switching cost must be non-negative");
        Self {
            table: QTable::new(2),
            switching_cost,
            lr,
            temperature,
            budget_mode,
        }
    }

    pub fn switching_cost(&self) -> f64 {
        self.switching_cost
    }

    pub fn table(&self) -> &QTable<AugmentedKey> {
        &self.table
    }

    pub fn table_mut(&mut self) -> &mut QTable<AugmentedKey> {
        &mut self.table
    }

    fn masked(&self, key: &AugmentedKey) -> bool {
        self.budget_mode && key.remaining == Some(0)
    }

    /// Probability of activating the centralised learner at `key`.
    pub fn activation_probability(&self, key: &AugmentedKey, temperature: f64) -> f64 {
        if self.masked(key) {
            return 0.0;
        }
        let row = self.table.row(key);
        let z = (row[0] - row[1]) / temperature;
        1.0 / (1.0 + z.exp())
    }

    /// Boltzmann draw over `Q_G(key, ·) / temperature`.
    pub fn act<R: Rng>(&self, key: &AugmentedKey, temperature: f64, rng: &mut R) -> u8 {
        debug_assert!(temperature > 0.0);
        if self.masked(key) {
            return INDEPENDENT;
        }
        let p = self.activation_probability(key, temperature);
        u8::from(rng.gen::<f64>() < p)
    }

    /// Greedy decision; ties resolve to the independent learner.
    pub fn greedy(&self, key: &AugmentedKey) -> u8 {
        if self.masked(key) {
            return INDEPENDENT;
        }
        let row = self.table.row(key);
        u8::from(row[1] > row[0])
    }

    fn best_value(&self, key: &AugmentedKey) -> f64 {
        let row = self.table.row(key);
        if self.masked(key) {
            row[0]
        } else {
            row[0].max(row[1])
        }
    }

    /// Q-learning on the cost-adjusted reward `r - c * g`.
    pub fn update<'a, I>(&mut self, batch: I, gamma: f64)
    where
        I: IntoIterator<Item = &'a TransitionRecord>,
    {
        for record in batch {
            let key = self.key(record.state, record.budget_before);
            let next = self.key(record.next_state, record.budget_after);
            let bootstrap = if record.terminal { 0.0 } else { self.best_value(&next) };
            let target = record.reward - self.switching_cost * f64::from(record.switch) + gamma * bootstrap;
            let q = &mut self.table.row_mut(&key)[usize::from(record.switch)];
            *q += self.lr * (target - *q);
        }
    }

    pub fn key(&self, state: StateKey, remaining: Option<u64>) -> AugmentedKey {
        AugmentedKey {
            state,
            remaining: if self.budget_mode { remaining } else { None },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::replay::record;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn global(c: f64, budget_mode: bool) -> GlobalQ {
        GlobalQ::new(c, 0.5, LinearSchedule::constant(1.0), budget_mode)
    }

    #[test]
    fn augmentation_depends_on_mode() {
        let b3 = BudgetState { total: 5, remaining: 3 };
        let b2 = BudgetState { total: 5, remaining: 2 };
        assert_eq!(augment_state(4, None), augment_state(4, None));
        assert_ne!(augment_state(4, Some(&b3)), augment_state(4, Some(&b2)));
        assert_eq!(augment_state(4, Some(&b3)), AugmentedKey { state: 4, remaining: Some(3) });
        let g = global(0.1, false);
        assert_eq!(g.key(4, Some(3)), g.key(4, Some(2)));
        let g = global(0.1, true);
        assert_ne!(g.key(4, Some(3)), g.key(4, Some(2)));
    }

    #[test]
    fn exhausted_budget_forces_independent() {
        let mut g = global(0.1, true);
        let key = g.key(0, Some(0));
        g.table_mut().set(&key, 1, 100.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!((0..1000).all(|_| g.act(&key, 1.0, &mut rng) == INDEPENDENT));
        assert_eq!(g.greedy(&key), INDEPENDENT);
    }

    #[test]
    fn equal_values_give_a_fair_coin() {
        let g = global(0.1, false);
        let key = g.key(0, None);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 10_000;
        let ones = (0..n).filter(|_| g.act(&key, 1.0, &mut rng) == CENTRAL).count() as f64;
        let expected = n as f64 / 2.0;
        let chi2 = 2.0 * (ones - expected).powi(2) / expected;
        let p = 1.0 - ChiSquared::new(1.0).unwrap().cdf(chi2);
        assert!(p > 0.001, "ones {ones}");
    }

    #[test]
    fn cold_temperature_is_greedy() {
        let mut g = global(0.1, false);
        let key = g.key(0, None);
        g.table_mut().set(&key, 1, 1.0);
        assert!(g.activation_probability(&key, 1e-3) > 1.0 - 1e-12);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        assert!((0..1000).all(|_| g.act(&key, 1e-3, &mut rng) == CENTRAL));
    }

    #[test]
    fn cost_is_charged_only_on_activation() {
        let mut g = global(0.01, false);
        g.update([&record(0, vec![0, 0], 1, 1.0, true)], 0.99);
        assert!((g.table().get(&g.key(0, None), 1) - 0.495).abs() < 1e-12);
        let mut g = global(0.01, false);
        g.update([&record(0, vec![0, 0], 0, 1.0, true)], 0.99);
        assert_eq!(g.table().get(&g.key(0, None), 0), 0.5);
    }

    #[test]
    fn zero_cost_makes_decisions_symmetric() {
        let mut a = global(0.0, false);
        let mut b = global(0.0, false);
        a.update([&record(0, vec![0, 0], 1, 0.7, true)], 0.9);
        b.update([&record(0, vec![0, 0], 0, 0.7, true)], 0.9);
        assert_eq!(a.table().get(&a.key(0, None), 1), b.table().get(&b.key(0, None), 0));
    }

    #[test]
    fn successor_max_excludes_masked_activation() {
        let mut g = global(0.0, true);
        g.lr = 1.0;
        let next = g.key(1, Some(0));
        g.table_mut().set(&next, 0, 1.0);
        g.table_mut().set(&next, 1, 50.0);
        let mut r = record(0, vec![0, 0], 1, 0.0, false);
        r.next_state = 1;
        r.budget_before = Some(1);
        r.budget_after = Some(0);
        g.update([&r], 0.5);
        assert_eq!(g.table().get(&g.key(0, Some(1)), 1), 0.5);
    }

    #[test]
    fn budget_ticks_down_and_refuses_overdraft() {
        let mut b = BudgetState::new(5);
        b.tick(1).unwrap();
        assert_eq!(b.remaining, 4);
        b.tick(0).unwrap();
        assert_eq!(b.remaining, 4);
        assert_eq!(b.tick(2), Err(BudgetError::InvalidDecision(2)));
        let mut empty = BudgetState::new(0);
        assert_eq!(empty.tick(1), Err(BudgetError::Exhausted { total: 0 }));
    }

    /// A controller that always wants to activate spends exactly its budget
    /// and then stays independent.
    #[test]
    fn budget_runs_out_after_n_activations() {
        let mut g = global(0.0, true);
        let mut budget = BudgetState::new(5);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut decisions = Vec::new();
        for _ in 0..10 {
            let key = g.key(0, Some(budget.remaining));
            g.table_mut().set(&key, 1, 1e6);
            let d = g.act(&key, 1e-3, &mut rng);
            budget.tick(d).unwrap();
            decisions.push(d);
        }
        assert_eq!(decisions, vec![1, 1, 1, 1, 1, 0, 0, 0, 0, 0]);
        assert_eq!(budget.remaining, 0);
    }
}
