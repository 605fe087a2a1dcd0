//! On-disk layout of a run directory.
//!
//! ```text
//! run.json          config and seed
//! metrics.csv       one row per evaluation
//! transitions.csv   one row per environment step
//! heatmap.csv       per-state activation counts
//! summary.json      final return, CL calls, normalising constant
//! tables/*.txt      learned tables as `key<TAB>action<TAB>value` lines
//! ```

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::{HeatmapRow, MetricsRecord, RunArtifacts, TransitionLog};
use super::{HarnessError, RunConfig};

pub const METRICS_HEADER: [&str; 9] = [
    "step",
    "episode",
    "seed",
    "eval_return",
    "cl_calls_cum",
    "cl_call_pct",
    "budget_remaining",
    "epsilon",
    "temperature",
];

pub const HEATMAP_HEADER: [&str; 6] = ["state_key", "x", "y", "activations", "visits", "rate"];

const TRANSITIONS_HEADER: [&str; 11] = [
    "step",
    "episode",
    "state",
    "joint_action",
    "g",
    "reward",
    "next_state",
    "terminal",
    "budget_before",
    "budget_after",
    "cl_calls_cum",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub seed: u64,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub final_return: f64,
    pub max_return: f64,
    pub cl_calls: u64,
    pub cl_call_pct: f64,
    pub total_steps: u64,
    pub budget_total: Option<u64>,
    pub budget_remaining: Option<u64>,
}

fn opt(v: Option<u64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn metrics_row(m: &MetricsRecord) -> [String; 9] {
    [
        m.step.to_string(),
        m.episode.to_string(),
        m.seed.to_string(),
        m.eval_return.to_string(),
        m.cl_calls_cum.to_string(),
        m.cl_call_pct.to_string(),
        opt(m.budget_remaining),
        m.epsilon.to_string(),
        m.temperature.to_string(),
    ]
}

pub fn write_metrics<W: Write>(out: W, metrics: &[MetricsRecord]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(METRICS_HEADER)?;
    for m in metrics {
        w.write_record(metrics_row(m))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_transitions<W: Write>(out: W, transitions: &[TransitionLog]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRANSITIONS_HEADER)?;
    let mut cum = 0u64;
    for t in transitions {
        cum += u64::from(t.switch);
        w.write_record([
            t.step.to_string(),
            t.episode.to_string(),
            t.state.to_string(),
            t.joint_action.to_string(),
            t.switch.to_string(),
            t.reward.to_string(),
            t.next_state.to_string(),
            u8::from(t.terminal).to_string(),
            opt(t.budget_before),
            opt(t.budget_after),
            cum.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_heatmap<W: Write>(out: W, rows: &[HeatmapRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(HEATMAP_HEADER)?;
    for r in rows {
        let (x, y) = r.cell.map_or((String::new(), String::new()), |(x, y)| (x.to_string(), y.to_string()));
        w.write_record([
            r.state_key.to_string(),
            x,
            y,
            r.activations.to_string(),
            r.visits.to_string(),
            r.rate().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>, HarnessError> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn summarize(run: &RunArtifacts) -> RunSummary {
    RunSummary {
        seed: run.seed,
        final_return: run.final_return(),
        max_return: run.max_return,
        cl_calls: run.cl_calls,
        cl_call_pct: run.cl_call_pct(),
        total_steps: run.config.schedule.total_steps,
        budget_total: run.budget.map(|b| b.total),
        budget_remaining: run.budget.map(|b| b.remaining),
    }
}

pub fn write_run(dir: &Path, run: &RunArtifacts) -> Result<(), HarnessError> {
    fs::create_dir_all(dir)?;
    let header = RunHeader {
        seed: run.seed,
        config: run.config.clone(),
    };
    fs::write(dir.join("run.json"), serde_json::to_string_pretty(&header).expect("header serialises"))?;
    fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summarize(run)).expect("summary serialises"),
    )?;
    write_metrics(create(&dir.join("metrics.csv"))?, &run.metrics)?;
    write_heatmap(create(&dir.join("heatmap.csv"))?, &run.heatmap)?;
    if run.config.output.save_transitions {
        write_transitions(create(&dir.join("transitions.csv"))?, &run.transitions)?;
    }
    if run.config.output.save_tables {
        let tables = dir.join("tables");
        fs::create_dir_all(&tables)?;
        for i in 0..run.iql.n_agents() {
            run.iql.table(i).write_flat(create(&tables.join(format!("iql_{i}.txt")))?)?;
            run.central.utility(i).write_flat(create(&tables.join(format!("central_utility_{i}.txt")))?)?;
        }
        let mut mixer = create(&tables.join("central_mixer.txt"))?;
        for (state, bias, weights) in run.central.mixer_rows() {
            writeln!(mixer, "{state}\tbias\t{bias}")?;
            for (i, w) in weights.iter().enumerate() {
                writeln!(mixer, "{state}\tw{i}\t{w}")?;
            }
        }
        mixer.flush()?;
        run.global.table().write_flat(create(&tables.join("global.txt"))?)?;
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(field: &str, what: &str) -> Result<T, HarnessError> {
    field
        .parse()
        .map_err(|_| HarnessError::Report(format!("cannot parse {what} from {field:?}")))
}

fn parse_opt(field: &str, what: &str) -> Result<Option<u64>, HarnessError> {
    if field.is_empty() {
        Ok(None)
    } else {
        parse(field, what).map(Some)
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRecord>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != METRICS_HEADER {
        return Err(HarnessError::Report(format!("{}: unexpected header", path.display())));
    }
    let mut rows = Vec::new();
    for record in r.records() {
        let f = record?;
        rows.push(MetricsRecord {
            step: parse(&f[0], "step")?,
            episode: parse(&f[1], "episode")?,
            seed: parse(&f[2], "seed")?,
            eval_return: parse(&f[3], "eval_return")?,
            cl_calls_cum: parse(&f[4], "cl_calls_cum")?,
            cl_call_pct: parse(&f[5], "cl_call_pct")?,
            budget_remaining: parse_opt(&f[6], "budget_remaining")?,
            epsilon: parse(&f[7], "epsilon")?,
            temperature: parse(&f[8], "temperature")?,
        });
    }
    Ok(rows)
}

/// `(step, g)` pairs from a transitions log.
pub fn read_switch_log(path: &Path) -> Result<Vec<(u64, u8)>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in r.records() {
        let f = record?;
        rows.push((parse(&f[0], "step")?, parse(&f[4], "g")?));
    }
    Ok(rows)
}

pub fn read_heatmap(path: &Path) -> Result<Vec<HeatmapRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in r.records() {
        let f = record?;
        let cell = if f[1].is_empty() {
            None
        } else {
            Some((parse(&f[1], "x")?, parse(&f[2], "y")?))
        };
        rows.push(HeatmapRow {
            state_key: parse(&f[0], "state_key")?,
            cell,
            activations: parse(&f[3], "activations")?,
            visits: parse(&f[4], "visits")?,
        });
    }
    Ok(rows)
}

pub fn read_summary(path: &Path) -> Result<RunSummary, HarnessError> {
    let text = fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Report(format!("{}: {e}", path.display())))
}
