//! Training runs, sweeps, and the files they produce.

pub mod config;
pub mod output;
pub mod report;
pub mod sweep;
pub mod train;

pub use config::{BudgetConfig, Decay, EnvConfig, GlobalConfig, LearnerConfig, OutputConfig, RunConfig, ScheduleConfig, SwitchMode};
pub use output::{read_metrics, write_run, METRICS_HEADER, HEATMAP_HEADER};
pub use report::{aggregate, failure_rate, spearman, AggregateRow};
pub use sweep::{sweep, SweepParam, SweepRow};
pub use train::{evaluate, random_switch_baseline, train, EvalResult, GreedyPolicy, HeatmapRow, MetricsRecord, RunArtifacts, TransitionLog};

use thiserror::Error;

use crate::env::EnvError;
use crate::switch::BudgetError;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Budget(#[from] BudgetError),
    #[error("{used} activations exceed the budget of {total}")]
    BudgetBreach { used: u64, total: u64 },
    #[error("{0}")]
    Report(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl HarnessError {
    /// Whether the error reports a broken run invariant rather than bad input.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(self, Self::Budget(_) | Self::BudgetBreach { .. })
    }
}
