//! Parameter sweeps over seeds, run in parallel.

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use super::config::{BudgetConfig, RunConfig};
use super::output::write_run;
use super::train::{train, RunArtifacts};
use super::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    Alpha,
    SwitchingCost,
    /// Budget as a share of the CL calls of an unbudgeted reference run
    /// with the same seed.
    BudgetFraction,
}

impl FromStr for SweepParam {
    type Err = HarnessError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "alpha" => Ok(Self::Alpha),
            "switching_cost" => Ok(Self::SwitchingCost),
            "budget_fraction" => Ok(Self::BudgetFraction),
            other => Err(HarnessError::Config(format!(
                "unknown sweep parameter {other:?} (expected alpha, switching_cost or budget_fraction)"
            ))),
        }
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Alpha => "alpha",
            Self::SwitchingCost => "switching_cost",
            Self::BudgetFraction => "budget_fraction",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seed: u64,
    pub final_return: f64,
    pub cl_calls: u64,
    pub cl_pct: f64,
    pub budget_total: Option<u64>,
}

impl SweepRow {
    fn from_run(value: f64, run: &RunArtifacts) -> Self {
        Self {
            value,
            seed: run.seed,
            final_return: run.final_return(),
            cl_calls: run.cl_calls,
            cl_pct: run.cl_call_pct(),
            budget_total: run.budget.map(|b| b.total),
        }
    }
}

/// Activation budget for `fraction` of a reference run's CL calls.
pub fn budget_from_fraction(fraction: f64, reference_calls: u64) -> u64 {
    (fraction * reference_calls as f64).round() as u64
}

fn configure(base: &RunConfig, param: SweepParam, value: f64, reference_calls: Option<u64>) -> Result<RunConfig, HarnessError> {
    let mut config = base.clone();
    match param {
        SweepParam::Alpha => config.env.set_alpha(value)?,
        SweepParam::SwitchingCost => config.global.switching_cost = value,
        SweepParam::BudgetFraction => {
            if value.is_nan() || value < 0.0 {
                return Err(HarnessError::Config("budget fractions must be non-negative".into()));
            }
            let calls = reference_calls.expect("reference runs precede budgeted runs");
            config.budget = Some(BudgetConfig {
                total: budget_from_fraction(value, calls),
            });
        }
    }
    config.validate()?;
    Ok(config)
}

/// Trains every `(value, seed)` pair. When `out` is given, each run is
/// written to `out/<param>=<value>/seed_<seed>` and the table to
/// `out/sweep.csv`. Rows come back ordered by value, then seed.
pub fn sweep(base: &RunConfig, param: SweepParam, values: &[f64], out: Option<&Path>) -> Result<Vec<SweepRow>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::Config("sweep needs at least one value".into()));
    }
    let seeds = &base.schedule.seeds;
    let references: Vec<Option<u64>> = if param == SweepParam::BudgetFraction {
        let mut reference = base.clone();
        reference.budget = None;
        seeds
            .par_iter()
            .map(|&seed| {
                let run = train(&reference, seed)?;
                if let Some(dir) = out {
                    write_run(&dir.join("reference").join(format!("seed_{seed}")), &run)?;
                }
                Ok(Some(run.cl_calls))
            })
            .collect::<Result<_, HarnessError>>()?
    } else {
        vec![None; seeds.len()]
    };

    let jobs: Vec<(f64, usize)> = values
        .iter()
        .flat_map(|&v| (0..seeds.len()).map(move |i| (v, i)))
        .collect();
    let rows = jobs
        .par_iter()
        .map(|&(value, i)| {
            let config = configure(base, param, value, references[i])?;
            let run = train(&config, seeds[i])?;
            if let Some(dir) = out {
                write_run(&dir.join(format!("{param}={value}")).join(format!("seed_{}", seeds[i])), &run)?;
            }
            Ok(SweepRow::from_run(value, &run))
        })
        .collect::<Result<Vec<_>, HarnessError>>()?;
    if let Some(dir) = out {
        write_sweep_table(std::fs::File::create(dir.join("sweep.csv"))?, param, &rows)?;
    }
    Ok(rows)
}

pub fn write_sweep_table<W: Write>(out: W, param: SweepParam, rows: &[SweepRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    let name = param.to_string();
    w.write_record([name.as_str(), "seed", "final_return", "cl_calls", "cl_pct", "budget"])?;
    for r in rows {
        w.write_record([
            r.value.to_string(),
            r.seed.to_string(),
            r.final_return.to_string(),
            r.cl_calls.to_string(),
            r.cl_pct.to_string(),
            r.budget_total.map(|b| b.to_string()).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parameters_parse() {
        assert_eq!("alpha".parse::<SweepParam>().unwrap(), SweepParam::Alpha);
        assert_eq!("budget_fraction".parse::<SweepParam>().unwrap().to_string(), "budget_fraction");
        assert!("gamma".parse::<SweepParam>().is_err());
    }

    #[test]
    fn fractions_round_to_whole_activations() {
        assert_eq!(budget_from_fraction(0.0, 123), 0);
        assert_eq!(budget_from_fraction(0.1, 125), 13);
        assert_eq!(budget_from_fraction(1.0, 125), 125);
    }
}
