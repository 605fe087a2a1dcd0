//! Transitions, the bounded replay buffer, and observation interning.

use std::collections::{HashMap, VecDeque};

use rand::Rng;

use crate::env::{Observation, StateKey};

/// Dense id of an interned local observation.
pub type ObsKey = u64;

/// Key shared by every observation the interner has not recorded.
pub const UNSEEN: ObsKey = ObsKey::MAX;

/// One environment step as stored in the shared buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionRecord {
    pub state: StateKey,
    pub observations: Vec<ObsKey>,
    pub joint_action: Vec<usize>,
    /// 1 when the centralised learner chose `joint_action`.
    pub switch: u8,
    pub reward: f64,
    pub next_state: StateKey,
    pub next_observations: Vec<ObsKey>,
    pub terminal: bool,
    /// Remaining activation budget before and after this step; `None`
    /// outside budget mode.
    pub budget_before: Option<u64>,
    pub budget_after: Option<u64>,
}

/// FIFO buffer with uniform sampling (with replacement).
#[derive(Debug, Clone)]
pub struct ReplayBuffer {
    capacity: usize,
    items: VecDeque<TransitionRecord>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        assert!(capacity > 0, "replay capacity must be positive");
        Self {
            capacity,
            items: VecDeque::with_capacity(capacity.min(1 << 16)),
        }
    }

    pub fn push(&mut self, record: TransitionRecord) {
        if self.items.len() == self.capacity {
            self.items.pop_front();
        }
        self.items.push_back(record);
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn iter(&self) -> impl Iterator<Item = &TransitionRecord> {
        self.items.iter()
    }

    /// Draws `batch_size` records uniformly with replacement.
    pub fn sample<'a, R: Rng>(&'a self, batch_size: usize, rng: &mut R) -> Vec<&'a TransitionRecord> {
        if self.items.is_empty() {
            return Vec::new();
        }
        (0..batch_size)
            .map(|_| &self.items[rng.gen_range(0..self.items.len())])
            .collect()
    }
}

/// Assigns dense ids to observations in order of first appearance.
#[derive(Debug, Clone, Default)]
pub struct ObservationInterner {
    ids: HashMap<Observation, ObsKey>,
}

impl ObservationInterner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, obs: &Observation) -> ObsKey {
        if let Some(&id) = self.ids.get(obs) {
            return id;
        }
        let id = self.ids.len() as ObsKey;
        self.ids.insert(obs.clone(), id);
        id
    }

    pub fn intern_all(&mut self, obs: &[Observation]) -> Vec<ObsKey> {
        obs.iter().map(|o| self.intern(o)).collect()
    }

    /// Id of a known observation, or [`UNSEEN`] without recording it.
    pub fn lookup(&self, obs: &Observation) -> ObsKey {
        self.ids.get(obs).copied().unwrap_or(UNSEEN)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

#[cfg(test)]
pub(crate) fn record(state: StateKey, joint_action: Vec<usize>, switch: u8, reward: f64, terminal: bool) -> TransitionRecord {
    let n = joint_action.len();
    TransitionRecord {
        state,
        observations: vec![0; n],
        joint_action,
        switch,
        reward,
        next_state: state,
        next_observations: vec![0; n],
        terminal,
        budget_before: None,
        budget_after: None,
    }
}
