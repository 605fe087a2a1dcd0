//! Aggregation across seeds, failure rates, and run-directory reports.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::output::{read_heatmap, read_metrics, read_summary, write_heatmap, RunSummary};
use super::train::{HeatmapRow, MetricsRecord};
use super::HarnessError;

/// Normal quantile for a two-sided 95% interval.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub step: u64,
    pub runs: usize,
    pub mean_return: f64,
    /// Half-width of the 95% interval, `1.96 * sd / sqrt(k)`.
    pub ci_half_width: f64,
    pub mean_cl_calls: f64,
    pub mean_cl_pct: f64,
}

impl AggregateRow {
    pub fn ci(&self) -> (f64, f64) {
        (self.mean_return - self.ci_half_width, self.mean_return + self.ci_half_width)
    }
}

/// Mean and sample standard deviation.
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn ci_half_width(xs: &[f64]) -> f64 {
    let (_, sd) = mean_sd(xs);
    Z_95 * sd / (xs.len() as f64).sqrt()
}

/// Per-step mean and 95% interval across runs whose evaluation steps align.
pub fn aggregate(runs: &[Vec<MetricsRecord>]) -> Result<Vec<AggregateRow>, HarnessError> {
    if runs.len() < 2 {
        return Err(HarnessError::Report("aggregation needs at least two runs".into()));
    }
    let steps: Vec<u64> = runs[0].iter().map(|m| m.step).collect();
    if runs.iter().any(|r| r.iter().map(|m| m.step).ne(steps.iter().copied())) {
        return Err(HarnessError::Report("runs have misaligned evaluation steps".into()));
    }
    Ok(steps
        .iter()
        .enumerate()
        .map(|(i, &step)| {
            let returns: Vec<f64> = runs.iter().map(|r| r[i].eval_return).collect();
            let k = runs.len() as f64;
            AggregateRow {
                step,
                runs: runs.len(),
                mean_return: mean_sd(&returns).0,
                ci_half_width: ci_half_width(&returns),
                mean_cl_calls: runs.iter().map(|r| r[i].cl_calls_cum as f64).sum::<f64>() / k,
                mean_cl_pct: runs.iter().map(|r| r[i].cl_call_pct).sum::<f64>() / k,
            }
        })
        .collect())
}

pub fn write_aggregate<W: Write>(out: W, rows: &[AggregateRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["step", "runs", "mean_return", "ci_low", "ci_high", "mean_cl_calls", "mean_cl_pct"])?;
    for r in rows {
        let (lo, hi) = r.ci();
        w.write_record([
            r.step.to_string(),
            r.runs.to_string(),
            r.mean_return.to_string(),
            lo.to_string(),
            hi.to_string(),
            r.mean_cl_calls.to_string(),
            r.mean_cl_pct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Fraction of tasks whose score is below `threshold`.
pub fn failure_rate(scores: &[f64], threshold: f64) -> Result<f64, HarnessError> {
    if scores.is_empty() {
        return Err(HarnessError::Report("failure rate of an empty task list".into()));
    }
    Ok(scores.iter().filter(|&&s| s < threshold).count() as f64 / scores.len() as f64)
}

fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation, with tied values given their average rank.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "spearman needs paired samples");
    let (rx, ry) = (ranks(xs), ranks(ys));
    let (mx, _) = mean_sd(&rx);
    let (my, _) = mean_sd(&ry);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    if vx == 0.0 || vy == 0.0 {
        return 0.0;
    }
    cov / (vx * vy).sqrt()
}

/// Sums per-state counts across runs.
pub fn merge_heatmaps(maps: &[Vec<HeatmapRow>]) -> Vec<HeatmapRow> {
    let mut merged: BTreeMap<u64, HeatmapRow> = BTreeMap::new();
    for row in maps.iter().flatten() {
        let entry = merged.entry(row.state_key).or_insert(HeatmapRow {
            state_key: row.state_key,
            cell: row.cell,
            activations: 0,
            visits: 0,
        });
        entry.activations += row.activations;
        entry.visits += row.visits;
    }
    merged.into_values().collect()
}

/// Run directories (those holding `metrics.csv`) below `root`, grouped by
/// their parent directory.
pub fn discover_runs(root: &Path) -> Result<BTreeMap<PathBuf, Vec<PathBuf>>, HarnessError> {
    fn walk(dir: &Path, found: &mut Vec<PathBuf>) -> std::io::Result<()> {
        if dir.join("metrics.csv").is_file() {
            found.push(dir.to_path_buf());
            return Ok(());
        }
        let mut entries: Vec<PathBuf> = fs::read_dir(dir)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.is_dir())
            .collect();
        entries.sort();
        for e in entries {
            walk(&e, found)?;
        }
        Ok(())
    }
    let mut found = Vec::new();
    walk(root, &mut found)?;
    if found.is_empty() {
        return Err(HarnessError::Report(format!("no runs under {}", root.display())));
    }
    let mut groups: BTreeMap<PathBuf, Vec<PathBuf>> = BTreeMap::new();
    for run in found {
        let parent = run.parent().unwrap_or(root).to_path_buf();
        groups.entry(parent).or_default().push(run);
    }
    Ok(groups)
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupReport {
    pub dir: PathBuf,
    pub runs: usize,
    pub mean_final_return: f64,
    pub ci_half_width: f64,
    /// Mean final return divided by the largest achievable return.
    pub normalized_score: f64,
    pub mean_cl_calls: f64,
    pub mean_cl_pct: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub groups: Vec<GroupReport>,
    pub failure_rate: Option<f64>,
}

/// Writes `aggregate.csv` (and `heatmap.csv` when asked) into every group
/// directory and summarises each group.
pub fn report_runs(root: &Path, heatmap: bool, failure_threshold: Option<f64>) -> Result<Report, HarnessError> {
    let mut groups = Vec::new();
    for (dir, runs) in discover_runs(root)? {
        let summaries: Vec<RunSummary> = runs
            .iter()
            .map(|r| read_summary(&r.join("summary.json")))
            .collect::<Result<_, _>>()?;
        if runs.len() >= 2 {
            let metrics: Vec<Vec<MetricsRecord>> = runs
                .iter()
                .map(|r| read_metrics(&r.join("metrics.csv")))
                .collect::<Result<_, _>>()?;
            let rows = aggregate(&metrics)?;
            write_aggregate(fs::File::create(dir.join("aggregate.csv"))?, &rows)?;
        }
        if heatmap {
            let maps: Vec<Vec<HeatmapRow>> = runs
                .iter()
                .map(|r| read_heatmap(&r.join("heatmap.csv")))
                .collect::<Result<_, _>>()?;
            write_heatmap(fs::File::create(dir.join("heatmap.csv"))?, &merge_heatmaps(&maps))?;
        }
        let finals: Vec<f64> = summaries.iter().map(|s| s.final_return).collect();
        let (mean, _) = mean_sd(&finals);
        let k = summaries.len() as f64;
        groups.push(GroupReport {
            dir,
            runs: runs.len(),
            mean_final_return: mean,
            ci_half_width: ci_half_width(&finals),
            normalized_score: mean / summaries[0].max_return,
            mean_cl_calls: summaries.iter().map(|s| s.cl_calls as f64).sum::<f64>() / k,
            mean_cl_pct: summaries.iter().map(|s| s.cl_call_pct).sum::<f64>() / k,
        });
    }
    let failure_rate = match failure_threshold {
        Some(t) => Some(failure_rate(&groups.iter().map(|g| g.normalized_score).collect::<Vec<_>>(), t)?),
        None => None,
    };
    Ok(Report { groups, failure_rate })
}
