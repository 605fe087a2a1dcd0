use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn mansa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mansa")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SHORT_ASSURANCE: &str = r#"{
  "env": {"kind": "assurance", "alpha": 1.0, "reward_noise": 0.0},
  "global": {"lr": 0.01},
  "schedule": {"total_steps": 2000, "warmup_steps": 100, "eval_every": 500, "eval_episodes": 2, "seeds": [0, 1]}
}"#;

#[test]
fn help_and_version_succeed() {
    assert_eq!(mansa(&["--help"]).status.code(), Some(0));
    assert_eq!(mansa(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_with_one() {
    assert_eq!(mansa(&[]).status.code(), Some(1));
    assert_eq!(mansa(&["train"]).status.code(), Some(1));
    assert_eq!(mansa(&["frobnicate"]).status.code(), Some(1));

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = write_config(dir.path(), r#"{"env": {"kind": "assurance", "alpha": 0.5}, "colour": "blue"}"#);
    let res = mansa(&["train", "--config", &bad, "--out", out]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("colour"));

    let good = write_config(dir.path(), SHORT_ASSURANCE);
    let res = mansa(&["sweep", "--config", &good, "--param", "gamma", "--values", "0.5", "--out", out]);
    assert_eq!(res.status.code(), Some(1));
    let res = mansa(&["report", "--runs", out, "--failure-threshold", "1.5"]);
    assert_eq!(res.status.code(), Some(1));
}

#[test]
fn train_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SHORT_ASSURANCE);
    let runs = dir.path().join("runs");
    let runs_str = runs.to_str().unwrap();

    let res = mansa(&["train", "--config", &config, "--out", runs_str]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    for seed in [0, 1] {
        let metrics = fs::read_to_string(runs.join(format!("seed_{seed}/metrics.csv"))).unwrap();
        assert_eq!(metrics.lines().count(), 5);
    }

    let res = mansa(&["train", "--config", &config, "--seed", "5", "--out", runs_str]);
    assert_eq!(res.status.code(), Some(0));
    assert!(runs.join("seed_5/summary.json").is_file());

    let res = mansa(&["report", "--runs", runs_str, "--heatmap", "--failure-threshold", "0.8"]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.contains("failure rate: 0.0000"), "{stdout}");
    let aggregate = fs::read_to_string(runs.join("aggregate.csv")).unwrap();
    assert!(aggregate.starts_with("step,runs,mean_return,ci_low,ci_high"));
    assert!(runs.join("heatmap.csv").is_file());
}

#[test]
fn baseline_random_and_sweep_write_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SHORT_ASSURANCE);
    let out = dir.path().join("coin");
    let res = mansa(&["baseline-random", "--config", &config, "--seed", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0));
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("seed_3/run.json")).unwrap()).unwrap();
    assert_eq!(run["config"]["global"]["mode"], "random");

    let out = dir.path().join("sweep");
    let res = mansa(&["sweep", "--config", &config, "--param", "switching_cost", "--values", "0.001,0.1", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let table = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 5);
    assert!(out.join("switching_cost=0.1/seed_1/metrics.csv").is_file());
}

#[test]
fn oracle_solves_the_bundled_chain() {
    let mdp = configs().join("mdp-chain.json");
    let mdp = mdp.to_str().unwrap();
    let res = mansa(&["oracle", "--mdp", mdp, "--c", "0.05"]);
    assert_eq!(res.status.code(), Some(0));
    let out: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(out["activation_set"], serde_json::json!([true, true, false]));
    // 10 at the absorbing state, then 0.9 * 10 - 0.05 and 0.9 * 8.95 - 0.05
    let values: Vec<f64> = out["values"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
    for (v, expected) in values.iter().zip([8.005, 8.95, 10.0]) {
        assert!((v - expected).abs() < 1e-6, "{values:?}");
    }

    let res = mansa(&["oracle", "--mdp", mdp, "--c", "0.05", "--budget", "1"]);
    assert_eq!(res.status.code(), Some(0));
    let out: serde_json::Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(out["activation_set_by_remaining"][1], serde_json::json!([false, true, false]));

    assert_eq!(mansa(&["oracle", "--mdp", mdp, "--c", "-1"]).status.code(), Some(1));
    assert_eq!(mansa(&["oracle", "--mdp", "/nonexistent.json", "--c", "0"]).status.code(), Some(1));
}

#[test]
fn bundled_configs_parse() {
    for entry in fs::read_dir(configs()).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().into_owned();
        if name.starts_with("mdp-") {
            continue;
        }
        let text = fs::read_to_string(&path).unwrap();
        mansa::harness::RunConfig::from_json_str(&text).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
}
