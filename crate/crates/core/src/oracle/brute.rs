use nalgebra::{DMatrix, DVector};

use super::{FiniteMdp, OracleError};

pub const MAX_ENUMERATED_POLICIES: usize = 1_000_000;

const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceResult {
    /// Pointwise maximum over all enumerated policies.
    pub values: Vec<f64>,
    /// Activation flags of an optimal policy, preferring fewer activations
    /// among policies within tolerance of the optimum.
    pub activation_set: Vec<bool>,
    pub policies_evaluated: usize,
}

#[derive(Clone, Copy)]
enum Choice {
    Direct(usize),
    Intervene,
}

fn evaluate(mdp: &FiniteMdp, central: &[usize], c: f64, choices: &[Choice]) -> Result<DVector<f64>, OracleError> {
    let n = mdp.states;
    let mut lhs = DMatrix::<f64>::identity(n, n);
    let mut rhs = DVector::<f64>::zeros(n);
    for s in 0..n {
        if mdp.is_terminal(s) {
            continue;
        }
        let (action, cost) = match choices[s] {
            Choice::Direct(a) => (a, 0.0),
            Choice::Intervene => (central[s], c),
        };
        rhs[s] = mdp.rewards[s][action] - cost;
        for (next, &p) in mdp.transitions[s][action].iter().enumerate() {
            lhs[(s, next)] -= mdp.discount * p;
        }
    }
    lhs.lu().solve(&rhs).ok_or(OracleError::Singular)
}

/// Solves the switching problem by evaluating every deterministic stationary
/// policy exactly. Refuses instances with more than
/// [`MAX_ENUMERATED_POLICIES`] policies.
pub fn brute_force_switching(mdp: &FiniteMdp, central_policy: &[usize], c: f64) -> Result<BruteForceResult, OracleError> {
    mdp.check_policy(central_policy)?;
    let options: Vec<Vec<Choice>> = (0..mdp.states)
        .map(|s| {
            if mdp.is_terminal(s) {
                return vec![Choice::Direct(0)];
            }
            (0..mdp.actions)
                .filter(|&a| mdp.independent(s, a))
                .map(Choice::Direct)
                .chain(std::iter::once(Choice::Intervene))
                .collect()
        })
        .collect();
    let count: f64 = options.iter().map(|o| o.len() as f64).product();
    if count > MAX_ENUMERATED_POLICIES as f64 {
        return Err(OracleError::EnumerationOverflow {
            policies: count,
            cap: MAX_ENUMERATED_POLICIES,
        });
    }

    let mut digits = vec![0usize; mdp.states];
    let mut evaluated = Vec::with_capacity(count as usize);
    loop {
        let choices: Vec<Choice> = digits.iter().zip(&options).map(|(&d, o)| o[d]).collect();
        let values = evaluate(mdp, central_policy, c, &choices)?;
        let activations: Vec<bool> = choices.iter().map(|ch| matches!(ch, Choice::Intervene)).collect();
        evaluated.push((values, activations));

        let mut i = 0;
        while i < digits.len() {
            digits[i] += 1;
            if digits[i] < options[i].len() {
                break;
            }
            digits[i] = 0;
            i += 1;
        }
        if i == digits.len() {
            break;
        }
    }

    let best: Vec<f64> = (0..mdp.states)
        .map(|s| evaluated.iter().map(|(v, _)| v[s]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let activation_set = evaluated
        .iter()
        .filter(|(v, _)| v.iter().zip(&best).all(|(x, b)| x >= &(b - TIE_TOLERANCE)))
        .min_by_key(|(_, act)| act.iter().filter(|&&g| g).count())
        .map(|(_, act)| act.clone())
        .expect("an optimal deterministic policy always exists");
    Ok(BruteForceResult {
        values: best,
        activation_set,
        policies_evaluated: evaluated.len(),
    })
}
