use std::collections::HashMap;
use std::fmt::Display;
use std::hash::Hash;
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

/// Sparse action-value table. Rows for unseen keys read as `init`.
#[derive(Debug, Clone, PartialEq)]
pub struct QTable<K: Hash + Eq> {
    n_actions: usize,
    init: f64,
    default_row: Vec<f64>,
    rows: HashMap<K, Vec<f64>>,
}

impl<K: Hash + Eq + Clone> QTable<K> {
    pub fn new(n_actions: usize) -> Self {
        Self::with_init(n_actions, 0.0)
    }

    pub fn with_init(n_actions: usize, init: f64) -> Self {
        Self {
            n_actions,
            init,
            default_row: vec![init; n_actions],
            rows: HashMap::new(),
        }
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn row(&self, key: &K) -> &[f64] {
        self.rows.get(key).unwrap_or(&self.default_row)
    }

    pub fn row_mut(&mut self, key: &K) -> &mut [f64] {
        if !self.rows.contains_key(key) {
            self.rows.insert(key.clone(), vec![self.init; self.n_actions]);
        }
        self.rows.get_mut(key).expect("inserted above")
    }

    pub fn get(&self, key: &K, action: usize) -> f64 {
        self.row(key)[action]
    }

    pub fn set(&mut self, key: &K, action: usize, value: f64) {
        self.row_mut(key)[action] = value;
    }

    pub fn max(&self, key: &K) -> f64 {
        max_value(self.row(key))
    }

    pub fn argmax(&self, key: &K) -> usize {
        argmax(self.row(key))
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&K, &[f64])> {
        self.rows.iter().map(|(k, v)| (k, v.as_slice()))
    }

    pub fn all_finite(&self) -> bool {
        self.rows.values().flatten().all(|v| v.is_finite())
    }
}

impl<K: Hash + Eq + Clone + Ord + Display> QTable<K> {
    /// Writes `key<TAB>action<TAB>value` lines, sorted by key then action.
    pub fn write_flat<W: Write>(&self, mut out: W) -> io::Result<()> {
        let mut keys: Vec<&K> = self.rows.keys().collect();
        keys.sort();
        for key in keys {
            for (a, v) in self.rows[key].iter().enumerate() {
                writeln!(out, "{key}\t{a}\t{v}")?;
            }
        }
        Ok(())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn max_value(values: &[f64]) -> f64 {
    values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Linear interpolation from `start` to `end` over `decay_steps`, then flat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearSchedule {
    pub start: f64,
    pub end: f64,
    pub decay_steps: u64,
}

impl LinearSchedule {
    pub fn new(start: f64, end: f64, decay_steps: u64) -> Self {
        Self {
            start,
            end,
            decay_steps,
        }
    }

    pub fn constant(value: f64) -> Self {
        Self::new(value, value, 0)
    }

    pub fn value(&self, step: u64) -> f64 {
        if step >= self.decay_steps {
            return self.end;
        }
        let frac = step as f64 / self.decay_steps as f64;
        self.start + frac * (self.end - self.start)
    }

    pub fn is_within(&self, lo: f64, hi: f64) -> bool {
        (lo..=hi).contains(&self.start) && (lo..=hi).contains(&self.end)
    }
}
