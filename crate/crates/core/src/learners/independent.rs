use rand::Rng;

use super::table::{LinearSchedule, QTable};
use crate::replay::{ObsKey, TransitionRecord};

/// Independent Q-learning: one table per agent over its own observations.
#[derive(Debug, Clone)]
pub struct IndependentQ {
    tables: Vec<QTable<ObsKey>>,
    pub lr: f64,
    pub epsilon: LinearSchedule,
}

impl IndependentQ {
    pub fn new(action_counts: &[usize], lr: f64, epsilon: LinearSchedule) -> Self {
        Self::with_init(action_counts, lr, epsilon, 0.0)
    }

    pub fn with_init(action_counts: &[usize], lr: f64, epsilon: LinearSchedule, init: f64) -> Self {
        Self {
            tables: action_counts
                .iter()
                .map(|&n| QTable::with_init(n, init))
                .collect(),
            lr,
            epsilon,
        }
    }

    pub fn n_agents(&self) -> usize {
        self.tables.len()
    }

    pub fn table(&self, agent: usize) -> &QTable<ObsKey> {
        &self.tables[agent]
    }

    pub fn table_mut(&mut self, agent: usize) -> &mut QTable<ObsKey> {
        &mut self.tables[agent]
    }

    /// ε-greedy per agent, each agent exploring independently.
    pub fn act<R: Rng>(&self, observations: &[ObsKey], epsilon: f64, rng: &mut R) -> Vec<usize> {
        self.tables
            .iter()
            .zip(observations)
            .map(|(table, obs)| {
                if rng.gen::<f64>() < epsilon {
                    rng.gen_range(0..table.n_actions())
                } else {
                    table.argmax(obs)
                }
            })
            .collect()
    }

    pub fn greedy(&self, observations: &[ObsKey]) -> Vec<usize> {
        self.tables
            .iter()
            .zip(observations)
            .map(|(table, obs)| table.argmax(obs))
            .collect()
    }

    /// One TD(0) step per record and agent; every agent learns from the
    /// shared team reward.
    pub fn update<'a, I>(&mut self, batch: I, gamma: f64)
    where
        I: IntoIterator<Item = &'a TransitionRecord>,
    {
        for record in batch {
            for (i, table) in self.tables.iter_mut().enumerate() {
                let bootstrap = if record.terminal {
                    0.0
                } else {
                    table.max(&record.next_observations[i])
                };
                let target = record.reward + gamma * bootstrap;
                let q = &mut table.row_mut(&record.observations[i])[record.joint_action[i]];
                *q += self.lr * (target - *q);
            }
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

    fn learner(lr: f64) -> IndependentQ {
        IndependentQ::new(&[2, 3], lr, LinearSchedule::constant(0.0))
    }

    #[test]
    fn zero_tables_act_on_action_zero() {
        let q = learner(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(q.act(&[4, 9], 0.0, &mut rng), vec![0, 0]);
    }

    #[test]
    fn greedy_follows_table() {
        let mut q = learner(0.5);
        q.table_mut(0).set(&7, 0, 1.0);
        q.table_mut(0).set(&7, 1, 2.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(q.act(&[7, 7], 0.0, &mut rng)[0], 1);
    }

    #[test]
    fn full_exploration_is_uniform() {
        let q = learner(0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mut counts = [0f64; 3];
        for _ in 0..n {
            counts[q.act(&[0, 0], 1.0, &mut rng)[1]] += 1.0;
        }
        let expected = n as f64 / 3.0;
        let chi2: f64 = counts.iter().map(|c| (c - expected).powi(2) / expected).sum();
        let p = 1.0 - ChiSquared::new(2.0).unwrap().cdf(chi2);
        assert!(p > 0.001, "chi2 {chi2} p {p}");
    }

    #[test]
    fn single_terminal_record() {
        let mut q = learner(0.5);
        let r = record(0, vec![1, 2], 0, 1.0, true);
        q.update([&r], 0.99);
        assert_eq!(q.table(0).get(&0, 1), 0.5);
        assert_eq!(q.table(1).get(&0, 2), 0.5);
        q.update([&r], 0.99);
        assert_eq!(q.table(0).get(&0, 1), 0.75);
    }

    #[test]
    fn zero_reward_terminal_is_a_no_op() {
        let mut q = learner(0.5);
        q.update([&record(0, vec![1, 2], 0, 0.0, true)], 0.99);
        assert_eq!(q.table(0).get(&0, 1), 0.0);
        assert!(q.table(0).all_finite());
    }

    #[test]
    fn bootstraps_from_next_observation() {
        let mut q = learner(1.0);
        q.table_mut(0).set(&5, 1, 2.0);
        let mut r = record(0, vec![0, 0], 0, 1.0, false);
        r.next_observations = vec![5, 5];
        q.update([&r], 0.5);
        assert_eq!(q.table(0).get(&0, 0), 2.0);
        assert_eq!(q.table(1).get(&0, 0), 1.0);
    }
}
