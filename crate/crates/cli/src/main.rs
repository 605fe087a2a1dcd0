use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mansa::harness::report::report_runs;
use mansa::harness::{random_switch_baseline, sweep, train, write_run, HarnessError, RunArtifacts, RunConfig, SweepParam};
use mansa::oracle::{solve_budgeted, solve_switching, FiniteMdp};

const USAGE_ERROR: u8 = 1;
const INVARIANT_VIOLATION: u8 = 2;

#[derive(Parser)]
#[command(name = "mansa", version, about = "Train and analyse switching multi-agent learners")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one seed (or every configured seed) and write run directories.
    Train(RunArgs),
    /// Train across values of one parameter and every configured seed.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// alpha, switching_cost or budget_fraction
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solve the switching problem exactly on a finite MDP fixture.
    Oracle {
        #[arg(long)]
        mdp: PathBuf,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        budget: Option<usize>,
        #[arg(long, default_value_t = 1e-9)]
        tolerance: f64,
    },
    /// Aggregate run directories into curves, heatmaps and failure rates.
    Report {
        #[arg(long)]
        runs: PathBuf,
        #[arg(long)]
        heatmap: bool,
        #[arg(long)]
        failure_threshold: Option<f64>,
    },
    /// Train with a fair-coin switch in place of the learned one.
    BaselineRandom(RunArgs),
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Defaults to every seed listed in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum CliError {
    Harness(HarnessError),
    Usage(String),
}

impl From<HarnessError> for CliError {
    fn from(e: HarnessError) -> Self {
        Self::Harness(e)
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            Self::Harness(e) if e.is_invariant_violation() => INVARIANT_VIOLATION,
            _ => USAGE_ERROR,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Harness(e) => write!(f, "{e}"),
            Self::Usage(msg) => f.write_str(msg),
        }
    }
}

fn run_seeds(args: &RunArgs, runner: fn(&RunConfig, u64) -> Result<RunArtifacts, HarnessError>) -> Result<(), CliError> {
    let config = RunConfig::load(&args.config)?;
    let seeds = args.seed.map_or_else(|| config.schedule.seeds.clone(), |s| vec![s]);
    for seed in seeds {
        let run = runner(&config, seed)?;
        let dir = args.out.join(format!("seed_{seed}"));
        write_run(&dir, &run)?;
        println!(
            "seed {seed}: final return {} | CL calls {} ({:.2}%) -> {}",
            run.final_return(),
            run.cl_calls,
            run.cl_call_pct(),
            dir.display()
        );
    }
    Ok(())
}

fn oracle(mdp_path: &Path, c: f64, budget: Option<usize>, tolerance: f64) -> Result<(), CliError> {
    let usage = |e: mansa::oracle::OracleError| CliError::Usage(e.to_string());
    let mdp = FiniteMdp::load(mdp_path).map_err(usage)?;
    let policy = mdp
        .central_policy
        .clone()
        .ok_or_else(|| CliError::Usage("fixture has no central_policy".into()))?;
    if c.is_nan() || c < 0.0 {
        return Err(CliError::Usage("switching cost must be non-negative".into()));
    }
    let out = match budget {
        None => {
            let sol = solve_switching(&mdp, &policy, c, tolerance).map_err(usage)?;
            serde_json::json!({
                "values": sol.values,
                "activation_set": sol.activation_set,
                "iterations": sol.iterations,
            })
        }
        Some(n) => {
            let sol = solve_budgeted(&mdp, &policy, c, n, tolerance).map_err(usage)?;
            serde_json::json!({
                "budget": n,
                "values_by_remaining": sol.values,
                "activation_set_by_remaining": sol.activation_set,
                "iterations": sol.iterations,
            })
        }
    };
    println!("{}", serde_json::to_string_pretty(&out).expect("json output"));
    Ok(())
}

fn report(runs: &Path, heatmap: bool, threshold: Option<f64>) -> Result<(), CliError> {
    if let Some(t) = threshold {
        if !(0.0..=1.0).contains(&t) {
            return Err(CliError::Usage("failure threshold must lie in [0, 1]".into()));
        }
    }
    let report = report_runs(runs, heatmap, threshold)?;
    println!("group\truns\tmean_final_return\tci95\tnormalized\tmean_cl_calls\tmean_cl_pct");
    for g in &report.groups {
        println!(
            "{}\t{}\t{:.4}\t{:.4}\t{:.4}\t{:.1}\t{:.2}",
            g.dir.display(),
            g.runs,
            g.mean_final_return,
            g.ci_half_width,
            g.normalized_score,
            g.mean_cl_calls,
            g.mean_cl_pct
        );
    }
    if let Some(rate) = report.failure_rate {
        println!("failure rate: {rate:.4}");
    }
    Ok(())
}

fn dispatch(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train(args) => run_seeds(&args, train),
        Command::BaselineRandom(args) => run_seeds(&args, random_switch_baseline),
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let param: SweepParam = param.parse().map_err(|e: HarnessError| CliError::Usage(e.to_string()))?;
            let config = RunConfig::load(&config)?;
            let rows = sweep(&config, param, &values, Some(&out))?;
            println!("{param}\tseed\tfinal_return\tcl_calls\tcl_pct");
            for r in rows {
                println!("{}\t{}\t{}\t{}\t{:.2}", r.value, r.seed, r.final_return, r.cl_calls, r.cl_pct);
            }
            Ok(())
        }
        Command::Oracle {
            mdp,
            c,
            budget,
            tolerance,
        } => oracle(&mdp, c, budget, tolerance),
        Command::Report {
            runs,
            heatmap,
            failure_threshold,
        } => report(&runs, heatmap, failure_threshold),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(USAGE_ERROR);
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
