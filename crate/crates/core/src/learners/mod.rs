//! The two base learners the switching controller arbitrates between.

mod central;
mod independent;
mod table;

pub use central::{mix, MonotonicJointQ};
pub use independent::IndependentQ;
pub use table::{argmax, max_value, LinearSchedule, QTable};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("mixing weight {weight} for agent {agent} is negative")]
    NegativeWeight { agent: usize, weight: f64 },
    #[error("{utilities} utilities but {weights} weights")]
    LengthMismatch { utilities: usize, weights: usize },
}
