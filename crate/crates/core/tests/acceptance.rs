//! Acceptance suite. Each test checks one criterion at its fixed tolerance
//! and prints a single `criterion N ...: PASS|FAIL` line before asserting.
//!
//! Run with `cargo test -p mansa-core --test acceptance -- --nocapture` to
//! see the lines.

use std::fs;
use std::path::PathBuf;
use std::sync::OnceLock;
use std::time::Instant;

use mansa::harness::output::{read_metrics, read_summary, read_switch_log};
use mansa::harness::report::{ci_half_width, mean_sd};
use mansa::harness::{random_switch_baseline, spearman, sweep, train, write_run, RunArtifacts, RunConfig, SweepParam, SwitchMode};
use mansa::oracle::{
    bellman_backup, brute_force_switching, heaviside_policy_masked, simulate_budgeted_rollout, solve_budgeted, solve_switching,
    FiniteMdp,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    RunConfig::load(&path).unwrap_or_else(|e| panic!("loading {}: {e}", path.display()))
}

fn report(id: u32, name: &str, pass: bool, detail: String) {
    println!("criterion {id:>2} {name}: {} ({detail})", if pass { "PASS" } else { "FAIL" });
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn train_all(config: &RunConfig) -> Vec<RunArtifacts> {
    config.schedule.seeds.iter().map(|&s| train(config, s).expect("training run")).collect()
}

fn finals(runs: &[RunArtifacts]) -> Vec<f64> {
    runs.iter().map(RunArtifacts::normalized_final_return).collect()
}

/// MANSA on the cooperative foraging map, shared by several criteria.
fn coop_runs() -> &'static [RunArtifacts] {
    static RUNS: OnceLock<Vec<RunArtifacts>> = OnceLock::new();
    RUNS.get_or_init(|| train_all(&config("lbf-5x5-coop.json")))
}

/// Random fixture with `states` states, four joint actions and the central
/// action withheld from the direct branch at about half the states.
fn fixture(rng: &mut ChaCha8Rng, states: usize, discount: f64) -> (FiniteMdp, Vec<usize>) {
    let mdp = FiniteMdp::random(rng, states, 4, discount);
    let policy = mdp.random_policy(rng);
    let mdp = mdp.with_pruned_central_actions(&policy, 0.5, rng);
    (mdp, policy)
}

const ORACLE_COSTS: [f64; 3] = [0.0, 0.01, 0.5];

fn oracle_fixtures() -> Vec<(FiniteMdp, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    (0..50)
        .map(|_| {
            let states = rng.gen_range(1..=4);
            fixture(&mut rng, states, 0.9)
        })
        .collect()
}

/// Value of the MDP restricted to direct actions, by plain value iteration.
fn no_intervention_values(mdp: &FiniteMdp) -> Vec<f64> {
    let mut v = vec![0.0; mdp.states];
    loop {
        let next: Vec<f64> = (0..mdp.states)
            .map(|s| {
                (0..mdp.actions)
                    .filter(|&a| mdp.independent(s, a))
                    .map(|a| {
                        mdp.rewards[s][a] + mdp.discount * (0..mdp.states).map(|t| mdp.transitions[s][a][t] * v[t]).sum::<f64>()
                    })
                    .fold(f64::NEG_INFINITY, f64::max)
            })
            .collect();
        let delta = next.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        v = next;
        if delta < 1e-13 {
            return v;
        }
    }
}

fn sup(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn criterion_01_contraction() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let discounts = [0.5, 0.9, 0.99];
    let mut worst_slack = f64::NEG_INFINITY;
    let mut failures = 0;
    for i in 0..1000 {
        let gamma = discounts[i % 3];
        let states = rng.gen_range(1..=6);
        let actions = rng.gen_range(1..=8);
        let mdp = FiniteMdp::random(&mut rng, states, actions, gamma);
        let policy = mdp.random_policy(&mut rng);
        let mdp = mdp.with_pruned_central_actions(&policy, 0.5, &mut rng);
        let c = rng.gen_range(0.0..1.0);
        let scale = rng.gen_range(0.1..100.0);
        let v1: Vec<f64> = (0..states).map(|_| rng.gen_range(-scale..scale)).collect();
        let v2: Vec<f64> = (0..states).map(|_| rng.gen_range(-scale..scale)).collect();
        let lhs = sup(&bellman_backup(&v1, &mdp, &policy, c), &bellman_backup(&v2, &mdp, &policy, c));
        let rhs = gamma * sup(&v1, &v2) + 1e-12;
        worst_slack = worst_slack.max(lhs - rhs);
        if lhs > rhs {
            failures += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && secs < 5.0;
    report(1, "contraction", pass, format!("{failures} violations in 1000 pairs, worst slack {worst_slack:.3e}, {secs:.2}s"));
    assert!(pass);
}

#[test]
fn criterion_02_oracle_equivalence() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut set_mismatches = 0;
    let mut activating = 0;
    for (mdp, policy) in oracle_fixtures() {
        for c in ORACLE_COSTS {
            let sol = solve_switching(&mdp, &policy, c, 1e-10).unwrap();
            let brute = brute_force_switching(&mdp, &policy, c).unwrap();
            worst = worst.max(sup(&sol.values, &brute.values));
            let heaviside = heaviside_policy_masked(&sol.q_values, &mdp, &policy, c);
            if heaviside != brute.activation_set {
                set_mismatches += 1;
            }
            activating += usize::from(heaviside.iter().any(|&g| g));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst <= 1e-6 && set_mismatches == 0 && secs < 60.0;
    report(
        2,
        "oracle equivalence",
        pass,
        format!("max value gap {worst:.2e}, {set_mismatches} activation-set mismatches, {activating}/150 cases activate, {secs:.2}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_03_budget_dp() {
    let mut monotone_breaks = 0;
    let mut zero_gap = 0.0f64;
    let mut large_gap = 0.0f64;
    let mut violations = 0;
    let mut rollouts = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for (mdp, policy) in oracle_fixtures() {
        let base = no_intervention_values(&mdp);
        for c in ORACLE_COSTS {
            let small = solve_budgeted(&mdp, &policy, c, 3, 1e-11).unwrap();
            for x in 0..3 {
                for s in 0..mdp.states {
                    if small.value(s, x) > small.value(s, x + 1) + 1e-9 {
                        monotone_breaks += 1;
                    }
                }
            }
            zero_gap = zero_gap.max(sup(&small.values[0], &base));

            let unconstrained = solve_switching(&mdp, &policy, c, 1e-11).unwrap();
            let large = solve_budgeted(&mdp, &policy, c, 250, 1e-11).unwrap();
            large_gap = large_gap.max(sup(&large.values[250], &unconstrained.values));

            for n in 0..=3 {
                let sol = solve_budgeted(&mdp, &policy, c, n, 1e-9).unwrap();
                for _ in 0..10_000 / (ORACLE_COSTS.len() * 4) + 1 {
                    let startstate = rng.gen_range(0..mdp.states);
                    if simulate_budgeted_rollout(&sol, &mdp, &policy, startstate, 100, &mut rng) > n {
                        violations += 1;
                    }
                    rollouts += 1;
                }
            }
        }
    }
    let pass = monotone_breaks == 0 && zero_gap <= 1e-9 && large_gap <= 1e-6 && violations == 0;
    report(
        3,
        "budget dp",
        pass,
        format!(
            "{monotone_breaks} monotonicity breaks, n=0 gap {zero_gap:.2e}, large-n gap {large_gap:.2e}, {violations} violations in {rollouts} rollouts"
        ),
    );
    assert!(pass);
}

const ALPHAS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// Mean CL calls per alpha, plus the raw rows.
fn alpha_sweep(name: &str) -> (Vec<f64>, Vec<mansa::harness::SweepRow>) {
    let base = config(name);
    assert!(base.schedule.total_steps >= 20_000 && base.schedule.seeds.len() == 3);
    let rows = sweep(&base, SweepParam::Alpha, &ALPHAS, None).unwrap();
    let calls = ALPHAS
        .iter()
        .map(|&a| mean(&rows.iter().filter(|r| r.value == a).map(|r| r.cl_calls as f64).collect::<Vec<_>>()))
        .collect();
    (calls, rows)
}

#[test]
fn criterion_04_assurance_trend() {
    let (calls, _) = alpha_sweep("assurance.json");
    let rho = spearman(&ALPHAS, &calls);
    let pass = calls[4] < calls[0] && rho <= -0.8;
    report(4, "assurance trend", pass, format!("mean CL calls by alpha {calls:?}, spearman {rho:.2}"));
    assert!(pass);
}

#[test]
fn criterion_05_nonmonotonic_trend_and_quality() {
    let (calls, rows) = alpha_sweep("nonmonotonic.json");
    let trend = calls[4] < calls[0];

    let at_one: Vec<f64> = rows.iter().filter(|r| r.value == 1.0).map(|r| r.final_return).collect();
    let near_eight = at_one.iter().filter(|&&r| (r - 8.0).abs() <= 0.5).count();

    let mut base = config("nonmonotonic.json");
    base.env.set_alpha(1.0).unwrap();
    let mode_mean = |mode: SwitchMode| {
        let mut c = base.clone();
        c.global.mode = mode;
        mean(&train_all(&c).iter().map(RunArtifacts::final_return).collect::<Vec<_>>())
    };
    let iql = mode_mean(SwitchMode::AlwaysIndependent);
    let central = mode_mean(SwitchMode::AlwaysCentral);
    let mansa = mean(&at_one);
    let quality = near_eight >= 2 && mansa >= iql.max(central) - 0.5;

    let pass = trend && quality;
    report(
        5,
        "nonmonotonic trend and quality",
        pass,
        format!(
            "mean CL calls by alpha {calls:?} (decrease: {trend}); alpha=1 returns {at_one:?}, {near_eight}/3 within 0.5 of 8; MANSA {mansa:.2} vs IQL {iql:.2}, central {central:.2}"
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_06_improvement_over_independent() {
    let coop = config("lbf-5x5-coop.json");
    assert_eq!(coop.schedule.total_steps, 100_000);
    let mansa = mean(&finals(coop_runs()));
    let mut iql_config = coop.clone();
    iql_config.global.mode = SwitchMode::AlwaysIndependent;
    let iql = mean(&finals(&train_all(&iql_config)));
    let pass = mansa >= iql - 0.05 && mansa >= 0.8;
    report(6, "improvement over IL", pass, format!("MANSA mean normalized return {mansa:.3}, IQL-only {iql:.3}, threshold 0.8"));
    assert!(pass);
}

#[test]
fn criterion_07_cl_thrift_across_coupling() {
    let weak = train_all(&config("lbf-5x5.json"));
    let pct = |runs: &[RunArtifacts]| mean(&runs.iter().map(RunArtifacts::cl_call_pct).collect::<Vec<_>>());
    let (weak_pct, coop_pct) = (pct(&weak), pct(coop_runs()));
    let pass = weak_pct < coop_pct;
    report(7, "CL thrift across coupling", pass, format!("CL call % weak coupling {weak_pct:.2}, coop {coop_pct:.2}"));
    assert!(pass);
}

#[test]
fn criterion_08_junction_locality() {
    let runs = train_all(&config("junction.json"));
    let mut lines = Vec::new();
    let mut pass = runs.len() == 3;
    for run in &runs {
        let (mut near, mut far) = (Vec::new(), Vec::new());
        for row in &run.heatmap {
            let (x, y) = row.cell.expect("junction states map to cells");
            match x.abs().max(y.abs()) {
                0 | 1 => near.push(row.rate()),
                d if d >= 3 => far.push(row.rate()),
                _ => {}
            }
        }
        let (near, far) = (mean(&near), mean(&far));
        pass &= near > far;
        lines.push(format!("seed {}: near {near:.3} far {far:.3}", run.seed));
    }
    report(8, "junction heatmap locality", pass, lines.join("; "));
    assert!(pass);
}

#[test]
fn criterion_09_budget_sweep() {
    let fractions = [0.1, 0.25, 0.5, 0.75, 1.0];
    let dir = tempfile::tempdir().unwrap();
    let rows = sweep(&config("lbf-5x5-coop.json"), SweepParam::BudgetFraction, &fractions, Some(dir.path())).unwrap();

    let mut violated = 0;
    for f in fractions {
        for seed in [0u64, 1, 2] {
            let run_dir = dir.path().join(format!("budget_fraction={f}")).join(format!("seed_{seed}"));
            let summary = read_summary(&run_dir.join("summary.json")).unwrap();
            let total = summary.budget_total.expect("budgeted run");
            let calls = summary.cl_calls;
            let switches = read_switch_log(&run_dir.join("transitions.csv")).unwrap();
            let logged = switches.iter().filter(|&&(_, g)| g == 1).count() as u64;
            if calls > total || logged != calls {
                violated += 1;
            }
        }
    }

    let stats: Vec<(f64, f64)> = fractions
        .iter()
        .map(|&f| {
            let r: Vec<f64> = rows.iter().filter(|r| r.value == f).map(|r| r.final_return).collect();
            (mean_sd(&r).0, ci_half_width(&r))
        })
        .collect();
    let shape_ok = stats.windows(2).all(|w| w[1].0 >= w[0].0 || w[1].0 + w[1].1 >= w[0].0 - w[0].1);
    let pass = shape_ok && violated == 0;
    let shown: Vec<String> = stats.iter().map(|(m, h)| format!("{m:.3}+-{h:.3}")).collect();
    report(9, "budget sweep shape", pass, format!("returns by fraction [{}], {violated} budget violations", shown.join(", ")));
    assert!(pass);
}

#[test]
fn criterion_10_switching_cost_robustness() {
    let base = config("lbf-5x5-coop.json");
    let costs = [0.005, 0.01, 0.02, 0.05];
    let rows = sweep(&base, SweepParam::SwitchingCost, &[0.0001, 0.005, 0.02, 0.05], None).unwrap();
    let returns_at = |c: f64| -> f64 {
        if c == base.global.switching_cost {
            mean(&finals(coop_runs()))
        } else {
            mean(&rows.iter().filter(|r| r.value == c).map(|r| r.final_return).collect::<Vec<_>>())
        }
    };
    let calls_at = |c: f64| -> f64 {
        if c == base.global.switching_cost {
            mean(&coop_runs().iter().map(|r| r.cl_calls as f64).collect::<Vec<_>>())
        } else {
            mean(&rows.iter().filter(|r| r.value == c).map(|r| r.cl_calls as f64).collect::<Vec<_>>())
        }
    };
    assert_eq!(base.global.switching_cost, 0.01);
    let returns: Vec<f64> = costs.iter().map(|&c| returns_at(c)).collect();
    let hi = returns.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = returns.iter().copied().fold(f64::INFINITY, f64::min);
    let robust = hi - lo <= 0.1 * hi;
    let (cheap, default) = (calls_at(0.0001), calls_at(0.01));
    let pass = robust && cheap > default;
    report(
        10,
        "switching-cost robustness",
        pass,
        format!("mean returns for c {costs:?}: {returns:.3?} (spread within 10%: {robust}); CL calls c=1e-4 {cheap:.0} vs c=1e-2 {default:.0}"),
    );
    assert!(pass);
}

#[test]
fn criterion_11_learned_vs_random_switching() {
    let coop = config("lbf-5x5-coop.json");
    let random: Vec<RunArtifacts> = coop.schedule.seeds.iter().map(|&s| random_switch_baseline(&coop, s).unwrap()).collect();
    let (learned, coin) = (mean(&finals(coop_runs())), mean(&finals(&random)));
    let pass = learned >= coin;
    report(11, "learned vs random switching", pass, format!("MANSA {learned:.3}, Bernoulli(0.5) switcher {coin:.3}"));
    assert!(pass);
}

#[test]
fn criterion_12_determinism_and_bookkeeping() {
    let dir = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut recount_ok = true;
    for name in ["assurance.json", "junction.json"] {
        let config = config(name);
        for seed in [0u64, 7] {
            let a = dir.path().join(format!("{name}-{seed}-a"));
            let b = dir.path().join(format!("{name}-{seed}-b"));
            write_run(&a, &train(&config, seed).unwrap()).unwrap();
            write_run(&b, &train(&config, seed).unwrap()).unwrap();
            identical &= fs::read(a.join("metrics.csv")).unwrap() == fs::read(b.join("metrics.csv")).unwrap();

            let metrics = read_metrics(&a.join("metrics.csv")).unwrap();
            let switches = read_switch_log(&a.join("transitions.csv")).unwrap();
            for m in &metrics {
                let recount = switches.iter().filter(|&&(step, g)| step < m.step && g == 1).count() as u64;
                recount_ok &= recount == m.cl_calls_cum;
            }
        }
    }
    let pass = identical && recount_ok;
    report(12, "determinism and bookkeeping", pass, format!("metrics bit-identical: {identical}, CL recount matches: {recount_ok}"));
    assert!(pass);
}
