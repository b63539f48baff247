//! Browser bindings for the replay lab. Every export returns a JSON string
//! so the page needs nothing beyond `JSON.parse`.

use replaylab::env::{oracle, Features, GAMMA};
use replaylab::harness::{preset, preset_names, run};
use replaylab::replay::{DmPerParams, PrioritizedBuffer, Regime, Transition};
use replaylab::rng;
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// `[{name, description}]` for every built-in preset.
#[wasm_bindgen]
pub fn presets() -> String {
    let list: Vec<_> = preset_names()
        .into_iter()
        .map(|(name, description)| json!({ "name": name, "description": description }))
        .collect();
    serde_json::Value::Array(list).to_string()
}

/// Parses `path=value` lines; blank lines and `#` comments are skipped.
pub fn parse_overrides(text: &str) -> Result<Vec<(String, String)>, String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| {
            l.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| format!("expected path=value, got `{l}`"))
        })
        .collect()
}

/// Runs one seed of a preset's base cell with overrides applied and returns
/// the metric series and heatmaps.
pub fn run_preset_json(name: &str, overrides: &str, seed: u64) -> Result<String, String> {
    let overrides = parse_overrides(overrides)?;
    let config = preset(name)
        .and_then(|c| c.with_overrides(&overrides))
        .map_err(|e| e.to_string())?;
    let result = run(&config, seed).map_err(|e| e.to_string())?;
    let mut value = serde_json::to_value(&result).map_err(|e| e.to_string())?;
    value["label"] = json!(config.name);
    Ok(value.to_string())
}

#[wasm_bindgen]
pub fn run_preset(name: &str, overrides: &str, seed: u32) -> Result<String, JsValue> {
    run_preset_json(name, overrides, seed as u64).map_err(js_err)
}

/// Exact and empirical sampling probabilities for a list of priorities.
/// `regime` is `uniform`, `proportional` or `dm_per`.
#[allow(clippy::too_many_arguments)]
pub fn sample_json(
    priorities: &[f64],
    regime: &str,
    alpha: f64,
    mixin: f64,
    replacement: bool,
    batch: usize,
    draws: usize,
    seed: u64,
) -> Result<String, String> {
    if priorities.is_empty() {
        return Err("no priorities given".into());
    }
    let regime = match regime {
        "uniform" => Regime::Uniform,
        "proportional" => Regime::Proportional,
        "dm_per" => {
            let params = DmPerParams {
                priority_exponent: alpha,
                mixin,
                ..DmPerParams::default()
            };
            params.validate()?;
            Regime::DmPer {
                params,
                step: 0,
                horizon: 1,
            }
        }
        other => return Err(format!("unknown regime `{other}`")),
    };
    let mut buffer = PrioritizedBuffer::new(priorities.len());
    for (i, &p) in priorities.iter().enumerate() {
        let t = Transition {
            s: Features::Index(i),
            a: 0,
            r: 0.0,
            s_next: Features::Index(i),
            discount: GAMMA,
        };
        buffer.insert(t, p).map_err(|e| e.to_string())?;
    }
    let exact = buffer.probabilities(&regime);
    let batch = batch.max(1);
    let mut counts = vec![0u64; priorities.len()];
    let mut r = rng::stream(seed, rng::BUFFER);
    let rounds = draws.div_ceil(batch);
    for _ in 0..rounds {
        let b = buffer
            .sample(batch, &regime, replacement, &mut r)
            .map_err(|e| e.to_string())?;
        for i in b.indices {
            counts[i] += 1;
        }
    }
    let total = (rounds * batch) as f64;
    let empirical: Vec<f64> = counts.iter().map(|&c| c as f64 / total).collect();
    Ok(json!({
        "exact": exact,
        "empirical": empirical,
        "draws": rounds * batch,
        "stored": buffer.priorities(),
    })
    .to_string())
}

#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn sample_priorities(
    priorities: &[f64],
    regime: &str,
    alpha: f64,
    mixin: f64,
    replacement: bool,
    batch: u32,
    draws: u32,
    seed: u32,
) -> Result<String, JsValue> {
    sample_json(priorities, regime, alpha, mixin, replacement, batch as usize, draws as usize, seed as u64)
        .map_err(js_err)
}

/// True values and visitation distribution of the uniform policy on the chain.
#[wasm_bindgen]
pub fn chain_oracle() -> Result<String, JsValue> {
    let values = oracle::chain_true_values().map_err(js_err)?;
    let visitation = oracle::chain_visitation().map_err(js_err)?;
    Ok(json!({
        "values": values.values,
        "visitation": visitation.values,
        "expected_length": oracle::chain_expected_episode_length().map_err(js_err)?,
    })
    .to_string())
}
