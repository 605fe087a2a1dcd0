use rand::Rng;

use super::{FiniteMdp, OracleError};

const MAX_ITERATIONS: usize = 1_000_000;

/// Fixed point of the switching operator.
#[derive(Debug, Clone, PartialEq)]
pub struct SwitchSolution {
    pub values: Vec<f64>,
    /// Per state: one column per joint action followed by the intervention
    /// column `Q(s, π_c(s)) - c`.
    pub q_values: Vec<Vec<f64>>,
    pub activation_set: Vec<bool>,
    pub iterations: usize,
    pub residual: f64,
}

/// Budgeted solution, indexed `[remaining][state]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BudgetedSolution {
    pub budget: usize,
    pub values: Vec<Vec<f64>>,
    pub q_values: Vec<Vec<Vec<f64>>>,
    pub activation_set: Vec<Vec<bool>>,
    pub iterations: usize,
    pub residual: f64,
}

impl BudgetedSolution {
    pub fn value(&self, state: usize, remaining: usize) -> f64 {
        self.values[remaining][state]
    }
}

/// `Q(s, π_c(s)) - c`, where `q_row` holds `Q(s, ·)` over joint actions.
pub fn intervention_value(q_row: &[f64], central_action: usize, c: f64) -> f64 {
    q_row[central_action] - c
}

/// `Q(s, a) = R(s, a) + γ Σ P(s' | s, a) v(s')` for every state and joint
/// action (terminal rows are zero).
pub fn action_values(values: &[f64], mdp: &FiniteMdp) -> Vec<Vec<f64>> {
    (0..mdp.states)
        .map(|s| {
            if mdp.is_terminal(s) {
                vec![0.0; mdp.actions]
            } else {
                (0..mdp.actions).map(|a| mdp.backup_value(s, a, values)).collect()
            }
        })
        .collect()
}

fn best_independent(mdp: &FiniteMdp, s: usize, q_row: &[f64]) -> f64 {
    q_row
        .iter()
        .enumerate()
        .filter(|&(a, _)| mdp.independent(s, a))
        .map(|(_, &q)| q)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// One application of the switching operator:
/// `v'(s) = max(Q(s, π_c(s)) - c, max_a Q(s, a))`, with terminal states at 0.
pub fn bellman_backup(values: &[f64], mdp: &FiniteMdp, central_policy: &[usize], c: f64) -> Vec<f64> {
    let q = action_values(values, mdp);
    (0..mdp.states)
        .map(|s| {
            if mdp.is_terminal(s) {
                return 0.0;
            }
            let direct = best_independent(mdp, s, &q[s]);
            direct.max(intervention_value(&q[s], central_policy[s], c))
        })
        .collect()
}

/// Activation rule `g(s) = H(Q(s, π_c(s)) - c - max_a Q(s, a))` with
/// `H(0) = 0`, maximising over every joint action.
pub fn heaviside_policy(q_values: &[Vec<f64>], central_policy: &[usize], c: f64) -> Vec<bool> {
    q_values
        .iter()
        .zip(central_policy)
        .map(|(row, &pc)| {
            let direct = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            intervention_value(row, pc, c) - direct > 0.0
        })
        .collect()
}

/// Activation rule where the direct branch only ranges over the actions
/// `mdp` makes available without intervention.
pub fn heaviside_policy_masked(q_values: &[Vec<f64>], mdp: &FiniteMdp, central_policy: &[usize], c: f64) -> Vec<bool> {
    (0..mdp.states)
        .map(|s| {
            if mdp.is_terminal(s) {
                return false;
            }
            let row = &q_values[s][..mdp.actions];
            intervention_value(row, central_policy[s], c) - best_independent(mdp, s, row) > 0.0
        })
        .collect()
}

fn stopping_threshold(tolerance: f64, discount: f64) -> f64 {
    if discount == 0.0 {
        f64::INFINITY
    } else {
        tolerance * (1.0 - discount) / discount
    }
}

fn sup_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Value iteration from `v = 0` until the sup-norm step is at most
/// `tolerance * (1 - γ) / γ`, which bounds the final error by `tolerance`.
pub fn solve_switching(mdp: &FiniteMdp, central_policy: &[usize], c: f64, tolerance: f64) -> Result<SwitchSolution, OracleError> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(OracleError::BadTolerance(tolerance));
    }
    mdp.check_policy(central_policy)?;
    let threshold = stopping_threshold(tolerance, mdp.discount);
    let mut values = vec![0.0; mdp.states];
    for iteration in 1..=MAX_ITERATIONS {
        let next = bellman_backup(&values, mdp, central_policy, c);
        let residual = sup_distance(&next, &values);
        values = next;
        if residual <= threshold {
            let q_values: Vec<Vec<f64>> = action_values(&values, mdp)
                .into_iter()
                .enumerate()
                .map(|(s, mut row)| {
                    let iv = if mdp.is_terminal(s) {
                        0.0
                    } else {
                        intervention_value(&row, central_policy[s], c)
                    };
                    row.push(iv);
                    row
                })
                .collect();
            let activation_set = heaviside_policy_masked(&q_values, mdp, central_policy, c);
            return Ok(SwitchSolution {
                values,
                q_values,
                activation_set,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(OracleError::NonConvergence {
        iterations: MAX_ITERATIONS,
        tolerance,
    })
}

/// Value iteration on `S × {0..=budget}`. Intervening at `(s, x)` needs
/// `x > 0` and moves to remaining budget `x - 1`.
pub fn solve_budgeted(mdp: &FiniteMdp, central_policy: &[usize], c: f64, budget: usize, tolerance: f64) -> Result<BudgetedSolution, OracleError> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(OracleError::BadTolerance(tolerance));
    }
    mdp.check_policy(central_policy)?;
    let threshold = stopping_threshold(tolerance, mdp.discount);
    let layers = budget + 1;
    let mut values = vec![vec![0.0; mdp.states]; layers];
    let backup = |values: &[Vec<f64>]| -> Vec<Vec<Vec<f64>>> {
        (0..layers)
            .map(|x| {
                let q = action_values(&values[x], mdp);
                q.into_iter()
                    .enumerate()
                    .map(|(s, mut row)| {
                        let iv = if x == 0 || mdp.is_terminal(s) {
                            f64::NEG_INFINITY
                        } else {
                            mdp.backup_value(s, central_policy[s], &values[x - 1]) - c
                        };
                        row.push(iv);
                        row
                    })
                    .collect()
            })
            .collect()
    };
    let value_of = |q: &[Vec<Vec<f64>>]| -> Vec<Vec<f64>> {
        q.iter()
            .map(|layer| {
                layer
                    .iter()
                    .enumerate()
                    .map(|(s, row)| {
                        if mdp.is_terminal(s) {
                            0.0
                        } else {
                            best_independent(mdp, s, &row[..mdp.actions]).max(row[mdp.actions])
                        }
                    })
                    .collect()
            })
            .collect()
    };
    for iteration in 1..=MAX_ITERATIONS {
        let q = backup(&values);
        let next = value_of(&q);
        let residual = next
            .iter()
            .zip(&values)
            .map(|(a, b)| sup_distance(a, b))
            .fold(0.0, f64::max);
        values = next;
        if residual <= threshold {
            let q_values = backup(&values);
            let activation_set = q_values
                .iter()
                .map(|layer| {
                    layer
                        .iter()
                        .enumerate()
                        .map(|(s, row)| {
                            !mdp.is_terminal(s)
                                && row[mdp.actions] - best_independent(mdp, s, &row[..mdp.actions]) > 0.0
                        })
                        .collect()
                })
                .collect();
            return Ok(BudgetedSolution {
                budget,
                values,
                q_values,
                activation_set,
                iterations: iteration,
                residual,
            });
        }
    }
    Err(OracleError::NonConvergence {
        iterations: MAX_ITERATIONS,
        tolerance,
    })
}

/// Follows the greedy budgeted policy from `(start, budget)` for up to
/// `horizon` steps, sampling transitions. Returns the number of
/// activations used.
pub fn simulate_budgeted_rollout<R: Rng>(
    solution: &BudgetedSolution,
    mdp: &FiniteMdp,
    central_policy: &[usize],
    start: usize,
    horizon: usize,
    rng: &mut R,
) -> usize {
    let mut state = start;
    let mut remaining = solution.budget;
    let mut activations = 0;
    for _ in 0..horizon {
        if mdp.is_terminal(state) {
            break;
        }
        let q = &solution.q_values[remaining][state];
        let action = if solution.activation_set[remaining][state] {
            remaining -= 1;
            activations += 1;
            central_policy[state]
        } else {
            (0..mdp.actions)
                .filter(|&a| mdp.independent(state, a))
                .max_by(|&a, &b| q[a].total_cmp(&q[b]).then(b.cmp(&a)))
                .expect("at least one independent action")
        };
        let u: f64 = rng.gen();
        let row = &mdp.transitions[state][action];
        let mut acc = 0.0;
        state = row.len() - 1;
        for (next, &p) in row.iter().enumerate() {
            acc += p;
            if u < acc {
                state = next;
                break;
            }
        }
    }
    activations
}
