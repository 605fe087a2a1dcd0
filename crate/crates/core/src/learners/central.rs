use std::collections::HashMap;

use rand::Rng;

use super::table::{argmax, LinearSchedule, QTable};
use super::LearnerError;
use crate::env::StateKey;
use crate::replay::TransitionRecord;

/// `bias + Σ_i weights[i] * utilities[i]`, with every weight non-negative.
pub fn mix(utilities: &[f64], weights: &[f64], bias: f64) -> Result<f64, LearnerError> {
    if utilities.len() != weights.len() {
        return Err(LearnerError::LengthMismatch {
            utilities: utilities.len(),
            weights: weights.len(),
        });
    }
    if let Some(i) = weights.iter().position(|&w| w.is_nan() || w < 0.0) {
        return Err(LearnerError::NegativeWeight {
            agent: i,
            weight: weights[i],
        });
    }
    Ok(bias + utilities.iter().zip(weights).map(|(u, w)| u * w).sum::<f64>())
}

/// Centralised learner with a per-state non-negative linear mixer over
/// per-agent utilities of the global state.
///
/// Because every mixing weight stays non-negative, the greedy joint action is
/// the tuple of per-agent utility argmaxes.
#[derive(Debug, Clone)]
pub struct MonotonicJointQ {
    utilities: Vec<QTable<StateKey>>,
    weights: HashMap<StateKey, Vec<f64>>,
    bias: HashMap<StateKey, f64>,
    default_weights: Vec<f64>,
    pub lr: f64,
    pub epsilon: LinearSchedule,
}

impl MonotonicJointQ {
    pub fn new(action_counts: &[usize], lr: f64, epsilon: LinearSchedule) -> Self {
        Self {
            utilities: action_counts.iter().map(|&n| QTable::new(n)).collect(),
            weights: HashMap::new(),
            bias: HashMap::new(),
            default_weights: vec![1.0; action_counts.len()],
            lr,
            epsilon,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.utilities.len()
    }

    pub fn utility(&self, agent: usize) -> &QTable<StateKey> {
        &self.utilities[agent]
    }

    pub fn utilities_mut(&mut self, agent: usize) -> &mut QTable<StateKey> {
        &mut self.utilities[agent]
    }

    pub fn weights(&self, state: StateKey) -> &[f64] {
        self.weights.get(&state).unwrap_or(&self.default_weights)
    }

    pub fn bias(&self, state: StateKey) -> f64 {
        self.bias.get(&state).copied().unwrap_or(0.0)
    }

    pub fn set_weights(&mut self, state: StateKey, weights: Vec<f64>) -> Result<(), LearnerError> {
        mix(&vec![0.0; weights.len()], &weights, 0.0)?;
        if weights.len() != self.n_agents() {
            return Err(LearnerError::LengthMismatch {
                utilities: self.n_agents(),
                weights: weights.len(),
            });
        }
        self.weights.insert(state, weights);
        Ok(())
    }

    pub fn set_bias(&mut self, state: StateKey, bias: f64) {
        self.bias.insert(state, bias);
    }

    pub fn q_tot(&self, state: StateKey, joint_action: &[usize]) -> f64 {
        let utils: Vec<f64> = self
            .utilities
            .iter()
            .zip(joint_action)
            .map(|(u, &a)| u.get(&state, a))
            .collect();
        mix(&utils, self.weights(state), self.bias(state)).expect("weights kept non-negative")
    }

    /// `max_a Q_tot(state, a)`, computed coordinate-wise.
    pub fn max_q_tot(&self, state: StateKey) -> f64 {
        let best: Vec<f64> = self.utilities.iter().map(|u| u.max(&state)).collect();
        mix(&best, self.weights(state), self.bias(state)).expect("weights kept non-negative")
    }

    pub fn greedy(&self, state: StateKey) -> Vec<usize> {
        self.utilities.iter().map(|u| argmax(u.row(&state))).collect()
    }

    /// ε-greedy over joint actions: with probability ε the whole joint
    /// action is drawn uniformly.
    pub fn act<R: Rng>(&self, state: StateKey, epsilon: f64, rng: &mut R) -> Vec<usize> {
        if rng.gen::<f64>() < epsilon {
            self.utilities
                .iter()
                .map(|u| rng.gen_range(0..u.n_actions()))
                .collect()
        } else {
            self.greedy(state)
        }
    }

    /// Squared-error step toward `r + γ max Q_tot(s')` for each record, with
    /// the step normalised by the squared gradient norm. Weights are clamped
    /// at zero afterwards.
    pub fn update<'a, I>(&mut self, batch: I, gamma: f64)
    where
        I: IntoIterator<Item = &'a TransitionRecord>,
    {
        for record in batch {
            let target = record.reward
                + if record.terminal {
                    0.0
                } else {
                    gamma * self.max_q_tot(record.next_state)
                };
            self.step_toward(record.state, &record.joint_action, target);
        }
    }

    fn step_toward(&mut self, state: StateKey, joint_action: &[usize], target: f64) {
        let utils: Vec<f64> = self
            .utilities
            .iter()
            .zip(joint_action)
            .map(|(u, &a)| u.get(&state, a))
            .collect();
        let weights = self.weights(state).to_vec();
        let bias = self.bias(state);
        let q = mix(&utils, &weights, bias).expect("weights kept non-negative");
        let error = q - target;
        if error == 0.0 {
            return;
        }
        let norm: f64 = 1.0
            + weights.iter().map(|w| w * w).sum::<f64>()
            + utils.iter().map(|u| u * u).sum::<f64>();
        let step = self.lr * error / norm;
        for (i, table) in self.utilities.iter_mut().enumerate() {
            table.row_mut(&state)[joint_action[i]] -= step * weights[i];
        }
        let new_weights = weights
            .iter()
            .zip(&utils)
            .map(|(w, u)| (w - step * u).max(0.0))
            .collect();
        self.weights.insert(state, new_weights);
        self.bias.insert(state, bias - step);
    }

    pub fn all_weights_non_negative(&self) -> bool {
        self.weights.values().flatten().all(|&w| w >= 0.0)
    }

    pub fn all_finite(&self) -> bool {
        self.utilities.iter().all(QTable::all_finite)
            && self.weights.values().flatten().all(|w| w.is_finite())
            && self.bias.values().all(|b| b.is_finite())
    }

    /// Flat dump of per-state mixer parameters: `state<TAB>bias<TAB>w_0,...`.
    pub fn mixer_rows(&self) -> Vec<(StateKey, f64, Vec<f64>)> {
        let mut keys: Vec<StateKey> = self.weights.keys().chain(self.bias.keys()).copied().collect();
        keys.sort_unstable();
        keys.dedup();
        keys.into_iter()
            .map(|s| (s, self.bias(s), self.weights(s).to_vec()))
            .collect()
    }

    #[cfg(test)]
    pub(crate) fn max_joint_brute_force(&self, state: StateKey) -> (f64, Vec<usize>) {
        let counts: Vec<usize> = self.utilities.iter().map(QTable::n_actions).collect();
        let total: usize = counts.iter().product();
        let mut best = (f64::NEG_INFINITY, Vec::new());
        for idx in 0..total {
            let joint = crate::env::unflatten_joint_action(&counts, idx);
            let q = self.q_tot(state, &joint);
            if q > best.0 {
                best = (q, joint);
            }
        }
        best
    }
}
