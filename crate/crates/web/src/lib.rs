//! Browser bindings for three small experiments: training MANSA on a matrix
//! game, reading activation sets off the exact oracle as the switching cost
//! changes, and the junction activation heatmap.
//!
//! Every export returns a JSON string; the plain functions behind them are
//! callable from native code and tests.

use mansa::harness::{train, EnvConfig, RunConfig};
use mansa::oracle::{solve_switching, FiniteMdp};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

const ASSURANCE: &str = include_str!("../../../configs/assurance.json");
const NONMONOTONIC: &str = include_str!("../../../configs/nonmonotonic.json");
const JUNCTION: &str = include_str!("../../../configs/junction.json");

fn matrix_config(game: &str, alpha: f64, switching_cost: f64, steps: u32, seed: u32) -> Result<RunConfig, String> {
    let text = match game {
        "assurance" => ASSURANCE,
        "nonmonotonic" => NONMONOTONIC,
        other => return Err(format!("unknown game {other:?}")),
    };
    let mut config = RunConfig::from_json_str(text).map_err(|e| e.to_string())?;
    config.env.set_alpha(alpha).map_err(|e| e.to_string())?;
    config.global.switching_cost = switching_cost;
    config.schedule.total_steps = u64::from(steps);
    config.schedule.warmup_steps = u64::from(steps / 20);
    config.schedule.eval_every = u64::from((steps / 20).max(1));
    config.schedule.eval_episodes = 1;
    config.schedule.seeds = vec![u64::from(seed)];
    config.validate().map_err(|e| e.to_string())?;
    Ok(config)
}

/// Payoff matrix, final greedy return and the cumulative CL-call curve.
pub fn matrix_game_run(game: &str, alpha: f64, switching_cost: f64, steps: u32, seed: u32) -> Result<String, String> {
    let config = matrix_config(game, alpha, switching_cost, steps, seed)?;
    let payoff = match &config.env {
        EnvConfig::Assurance { .. } => mansa::env::AlphaGameSpec::assurance(alpha),
        _ => mansa::env::AlphaGameSpec::nonmonotonic(alpha),
    }
    .map_err(|e| e.to_string())?
    .payoff();
    let run = train(&config, u64::from(seed)).map_err(|e| e.to_string())?;
    let curve: Vec<[u64; 2]> = run.metrics.iter().map(|m| [m.step, m.cl_calls_cum]).collect();
    Ok(json!({
        "payoff": payoff.entries,
        "final_return": run.final_return(),
        "cl_calls": run.cl_calls,
        "cl_pct": run.cl_call_pct(),
        "curve": curve,
    })
    .to_string())
}

/// Solves one random MDP (whose direct actions exclude the central action at
/// roughly half the states) for each switching cost.
pub fn oracle_activation_sets(seed: u32, costs: &[f64]) -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
    let mdp = FiniteMdp::random(&mut rng, 6, 4, 0.9);
    let policy = mdp.random_policy(&mut rng);
    let mdp = mdp.with_pruned_central_actions(&policy, 0.5, &mut rng);
    let rows = costs
        .iter()
        .map(|&c| {
            let sol = solve_switching(&mdp, &policy, c, 1e-9).map_err(|e| e.to_string())?;
            Ok(json!({ "c": c, "activation_set": sol.activation_set, "values": sol.values }))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json!({ "states": mdp.states, "central_policy": policy, "rows": rows }).to_string())
}

/// Per-cell activation rates after training on the junction.
pub fn junction_heatmap_run(steps: u32, seed: u32) -> Result<String, String> {
    let mut config = RunConfig::from_json_str(JUNCTION).map_err(|e| e.to_string())?;
    let EnvConfig::Junction(junction) = &config.env else {
        unreachable!("junction config holds a junction env")
    };
    let arm_length = junction.arm_length;
    config.schedule.total_steps = u64::from(steps);
    config.schedule.eval_every = u64::from(steps.max(1));
    config.schedule.seeds = vec![u64::from(seed)];
    config.validate().map_err(|e| e.to_string())?;
    let run = train(&config, u64::from(seed)).map_err(|e| e.to_string())?;
    let cells: Vec<_> = run
        .heatmap
        .iter()
        .filter_map(|r| r.cell.map(|(x, y)| json!({ "x": x, "y": y, "visits": r.visits, "rate": r.rate() })))
        .collect();
    Ok(json!({
        "arm_length": arm_length,
        "final_return": run.final_return(),
        "cells": cells,
    })
    .to_string())
}

#[wasm_bindgen(js_name = trainMatrixGame)]
pub fn train_matrix_game(game: &str, alpha: f64, switching_cost: f64, steps: u32, seed: u32) -> Result<String, JsError> {
    matrix_game_run(game, alpha, switching_cost, steps, seed).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = oracleActivationSets)]
pub fn oracle_activation_sets_js(seed: u32, costs: Vec<f64>) -> Result<String, JsError> {
    oracle_activation_sets(seed, &costs).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = junctionHeatmap)]
pub fn junction_heatmap(steps: u32, seed: u32) -> Result<String, JsError> {
    junction_heatmap_run(steps, seed).map_err(|e| JsError::new(&e))
}
