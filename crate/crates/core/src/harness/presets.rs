//! Named experiment configurations, one per study setting.

use std::collections::BTreeMap;

use serde_json::{json, Value};

use super::config::{AgentSection, BufferSection, ExperimentConfig, OutputSection, SelectSection};
use crate::agents::{LearnerKind, ReplayVariant, RepresentationKind};
use crate::approx::{adam, OptimizerKind};
use crate::env::{EnvKind, EnvSpec, NoiseSpec};
use crate::error::{Error, Result};
use crate::metrics::{HeatmapKind, DEFAULT_CADENCE};
use crate::replay::DmPerParams;

fn pow(base: f64, e: i32) -> f64 {
    base.powi(e)
}

/// `[8^-6, 8^-5, 8^-4, 8^-3, 8^-2]`.
pub fn tabular_prediction_lrs() -> Vec<f64> {
    (2..=6).rev().map(|e| pow(8.0, -e)).collect()
}

/// `[8^-6, 8^-5/4, 8^-5, 8^-4/4, 8^-4, 8^-3/4, 8^-3]`.
pub fn nn_prediction_lrs() -> Vec<f64> {
    vec![
        pow(8.0, -6),
        pow(8.0, -5) / 4.0,
        pow(8.0, -5),
        pow(8.0, -4) / 4.0,
        pow(8.0, -4),
        pow(8.0, -3) / 4.0,
        pow(8.0, -3),
    ]
}

/// `[8^-7 .. 8^-2]`.
pub fn tabular_control_lrs() -> Vec<f64> {
    (2..=7).rev().map(|e| pow(8.0, -e)).collect()
}

/// `[8^-5 .. 8^-1]`.
pub fn nn_control_lrs() -> Vec<f64> {
    (1..=5).rev().map(|e| pow(8.0, -e)).collect()
}

/// `[4^-8 .. 4^-2]`.
pub fn classic_control_lrs() -> Vec<f64> {
    (2..=8).rev().map(|e| pow(4.0, -e)).collect()
}

fn seeds(n: u64) -> Vec<u64> {
    (0..n).collect()
}

fn variants(list: &[ReplayVariant]) -> Vec<Value> {
    list.iter().map(|v| Value::from(v.name())).collect()
}

fn floats(xs: &[f64]) -> Vec<Value> {
    xs.iter().map(|&x| Value::from(x)).collect()
}

fn base(name: &str, env: EnvSpec, agent: AgentSection, capacity: usize, horizon: u64, n_seeds: u64) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        horizon,
        seeds: seeds(n_seeds),
        cadence: DEFAULT_CADENCE,
        metrics: Vec::new(),
        smoothing_window: None,
        heatmaps: Vec::new(),
        heatmap_every: 1000,
        env,
        agent,
        buffer: BufferSection {
            capacity,
            replacement: true,
            recompute_every: None,
            dm_per: DmPerParams::default(),
        },
        output: OutputSection::default(),
        sweep: BTreeMap::new(),
        select: SelectSection::default(),
    }
}

fn agent(kind: LearnerKind, representation: RepresentationKind, hidden: usize, lr: f64, batch: usize) -> AgentSection {
    AgentSection {
        kind,
        variant: ReplayVariant::Uniform,
        representation,
        hidden,
        learning_rate: lr,
        eper_learning_rate: None,
        batch_size: batch,
        target_refresh: None,
        recompute_with_online: false,
        epsilon: 0.1,
        optimizer: OptimizerKind::Adam,
        adam_eps: adam::DEFAULT_EPS,
    }
}

fn chain_prediction(name: &str, nn: bool, n_seeds: u64) -> ExperimentConfig {
    let a = if nn {
        agent(LearnerKind::PredictionTd0, RepresentationKind::Mlp, 32, pow(8.0, -5), 8)
    } else {
        agent(LearnerKind::PredictionTd0, RepresentationKind::Tabular, 32, pow(8.0, -4), 8)
    };
    base(name, EnvSpec::new(EnvKind::Chain), a, 8000, 80_000, n_seeds)
}

fn chain_control(name: &str, nn: bool, n_seeds: u64) -> ExperimentConfig {
    let mut c = if nn {
        let mut a = agent(LearnerKind::Dqn, RepresentationKind::Mlp, 32, pow(8.0, -3), 8);
        a.target_refresh = Some(100);
        base(name, EnvSpec::new(EnvKind::Chain), a, 10_000, 100_000, n_seeds)
    } else {
        let a = agent(LearnerKind::TabularQ, RepresentationKind::Tabular, 32, pow(8.0, -2), 8);
        base(name, EnvSpec::new(EnvKind::Chain), a, 10_000, 100_000, n_seeds)
    };
    let lrs = if nn { nn_control_lrs() } else { tabular_control_lrs() };
    c.sweep.insert("agent.learning_rate".into(), floats(&lrs));
    c.select.stage1_seeds = n_seeds as usize;
    c.select.stage2_seeds = n_seeds as usize;
    c
}

fn all_variants_axis(c: &mut ExperimentConfig) {
    c.sweep
        .insert("agent.variant".into(), variants(&ReplayVariant::ALL));
}

/// Uniform, Naive PER, DM-PER, EPER and Modified PER (Naive PER without
/// replacement, recomputing every 10 steps).
fn classic_arms() -> Vec<Value> {
    vec![
        json!({"label": "uniform", "agent.variant": "uniform"}),
        json!({"label": "naive_per", "agent.variant": "naive_per"}),
        json!({"label": "dm_per", "agent.variant": "dm_per"}),
        json!({"label": "eper", "agent.variant": "eper"}),
        json!({"label": "modified_per", "agent.variant": "naive_per",
               "buffer.replacement": false, "buffer.recompute_every": 10}),
    ]
}

fn classic(name: &str, kind: EnvKind) -> ExperimentConfig {
    let mut a = agent(LearnerKind::Dqn, RepresentationKind::Mlp, 64, pow(4.0, -4), 64);
    a.target_refresh = Some(128);
    let mut c = base(name, EnvSpec::new(kind), a, 10_000, 100_000, 30);
    c.sweep.insert("+arm".into(), classic_arms());
    c.sweep
        .insert("agent.learning_rate".into(), floats(&classic_control_lrs()));
    c.select.stage1_seeds = 30;
    c.select.stage2_seeds = 100;
    c
}

type Builder = fn() -> ExperimentConfig;

fn registry() -> Vec<(&'static str, &'static str, Builder)> {
    vec![
        ("fig2_noisy_pred", "NN chain prediction with noisy terminal reward, four replay variants", || {
            let mut c = chain_prediction("fig2_noisy_pred", true, 30);
            c.env.noise = Some(NoiseSpec::default());
            all_variants_axis(&mut c);
            c.sweep.insert("agent.learning_rate".into(), floats(&nn_prediction_lrs()));
            c.select.stage1_seeds = 30;
            c.select.stage2_seeds = 30;
            c
        }),
        ("fig3_chain_pred_tabular", "tabular chain prediction, four replay variants", || {
            let mut c = chain_prediction("fig3_chain_pred_tabular", false, 30);
            c.heatmaps = vec![HeatmapKind::ValueEstimates, HeatmapKind::SamplingProbability];
            all_variants_axis(&mut c);
            c
        }),
        ("fig3_chain_pred_nn", "NN chain prediction, four replay variants", || {
            let mut c = chain_prediction("fig3_chain_pred_nn", true, 30);
            c.heatmaps = vec![HeatmapKind::ValueEstimates, HeatmapKind::SamplingProbability];
            all_variants_axis(&mut c);
            c
        }),
        ("fig3_chain_pred_tabular_lr", "tabular chain prediction learning-rate sensitivity", || {
            let mut c = chain_prediction("fig3_chain_pred_tabular_lr", false, 30);
            all_variants_axis(&mut c);
            c.sweep.insert("agent.learning_rate".into(), floats(&tabular_prediction_lrs()));
            c
        }),
        ("fig3_chain_pred_nn_lr", "NN chain prediction learning-rate sensitivity", || {
            let mut c = chain_prediction("fig3_chain_pred_nn_lr", true, 30);
            all_variants_axis(&mut c);
            c.sweep.insert("agent.learning_rate".into(), floats(&nn_prediction_lrs()));
            c
        }),
        ("fig5_target_nets", "NN chain prediction, Naive PER with target refresh 1, 100, 500", || {
            let mut c = chain_prediction("fig5_target_nets", true, 30);
            c.agent.variant = ReplayVariant::NaivePer;
            c.agent.target_refresh = Some(1);
            c.sweep.insert("agent.target_refresh".into(), vec![1.into(), 100.into(), 500.into()]);
            c
        }),
        ("fig6_chain_control", "tabular Q-learning on the chain, four replay variants", || {
            let mut c = chain_control("fig6_chain_control", false, 50);
            all_variants_axis(&mut c);
            c
        }),
        ("fig6_chain_control_dqn", "DQN on the chain, four replay variants", || {
            let mut c = chain_control("fig6_chain_control_dqn", true, 50);
            all_variants_axis(&mut c);
            c
        }),
        ("fig7_pred_replacement", "tabular chain prediction, with vs without replacement", || {
            let mut c = chain_prediction("fig7_pred_replacement", false, 50);
            c.sweep.insert("agent.variant".into(), variants(&[ReplayVariant::Uniform, ReplayVariant::NaivePer]));
            c.sweep.insert("buffer.replacement".into(), vec![true.into(), false.into()]);
            c.sweep.insert("agent.batch_size".into(), vec![1.into(), 8.into(), 64.into(), 256.into()]);
            c
        }),
        ("fig7_pred_replacement_nn", "NN chain prediction, with vs without replacement", || {
            let mut c = chain_prediction("fig7_pred_replacement_nn", true, 50);
            c.sweep.insert("agent.variant".into(), variants(&[ReplayVariant::Uniform, ReplayVariant::NaivePer]));
            c.sweep.insert("buffer.replacement".into(), vec![true.into(), false.into()]);
            c.sweep.insert("agent.batch_size".into(), vec![1.into(), 8.into(), 64.into(), 256.into()]);
            c
        }),
        ("fig8_control_replacement", "tabular chain control, with vs without replacement", || {
            let mut c = chain_control("fig8_control_replacement", false, 50);
            c.sweep.insert("agent.variant".into(), variants(&[ReplayVariant::Uniform, ReplayVariant::NaivePer]));
            c.sweep.insert("buffer.replacement".into(), vec![true.into(), false.into()]);
            c.sweep.insert("agent.batch_size".into(), vec![1.into(), 8.into(), 64.into(), 256.into()]);
            c
        }),
        ("fig8_control_replacement_dqn", "DQN chain control, with vs without replacement", || {
            let mut c = chain_control("fig8_control_replacement_dqn", true, 50);
            c.sweep.insert("agent.variant".into(), variants(&[ReplayVariant::Uniform, ReplayVariant::NaivePer]));
            c.sweep.insert("buffer.replacement".into(), vec![true.into(), false.into()]);
            c.sweep.insert("agent.batch_size".into(), vec![1.into(), 8.into(), 64.into(), 256.into()]);
            c
        }),
        ("fig9_pred_recompute", "tabular chain prediction, recomputing priorities every 10 or 1000 steps", || {
            let mut c = chain_prediction("fig9_pred_recompute", false, 30);
            c.buffer.recompute_every = Some(10);
            c.sweep.insert(
                "agent.variant".into(),
                variants(&[ReplayVariant::NaivePer, ReplayVariant::DmPer, ReplayVariant::Eper]),
            );
            c.sweep.insert("buffer.recompute_every".into(), vec![10.into(), 1000.into()]);
            c
        }),
        ("fig9_pred_recompute_nn", "NN chain prediction, recomputing priorities every 10 or 1000 steps", || {
            let mut c = chain_prediction("fig9_pred_recompute_nn", true, 30);
            c.buffer.recompute_every = Some(10);
            c.sweep.insert(
                "agent.variant".into(),
                variants(&[ReplayVariant::NaivePer, ReplayVariant::DmPer, ReplayVariant::Eper]),
            );
            c.sweep.insert("buffer.recompute_every".into(), vec![10.into(), 1000.into()]);
            c
        }),
        ("fig10_control_recompute", "tabular chain control, Naive PER with recompute and without replacement", || {
            let mut c = chain_control("fig10_control_recompute", false, 50);
            c.agent.batch_size = 64;
            c.sweep.insert("+arm".into(), recompute_arms());
            c
        }),
        ("fig10_control_recompute_dqn", "DQN chain control, Naive PER with recompute and without replacement", || {
            let mut c = chain_control("fig10_control_recompute_dqn", true, 50);
            c.agent.batch_size = 64;
            c.sweep.insert("+arm".into(), recompute_arms());
            c
        }),
        ("fig11_mountaincar", "DQN on mountain car, five replay agents", || classic("fig11_mountaincar", EnvKind::Mountaincar)),
        ("fig11_acrobot", "DQN on acrobot, five replay agents", || classic("fig11_acrobot", EnvKind::Acrobot)),
        ("fig11_cartpole", "DQN on cart-pole, five replay agents", || classic("fig11_cartpole", EnvKind::Cartpole)),
        ("fig11_cliffworld", "DQN on cliffworld, five replay agents", || classic("fig11_cliffworld", EnvKind::Cliffworld)),
        ("fig12_cliffworld_seeds", "DQN on cliffworld, 100 individual seeds per agent", || {
            let mut c = classic("fig12_cliffworld_seeds", EnvKind::Cliffworld);
            c.sweep.remove("agent.learning_rate");
            c.seeds = seeds(100);
            c
        }),
    ]
}

fn recompute_arms() -> Vec<Value> {
    vec![
        json!({"label": "uniform", "agent.variant": "uniform"}),
        json!({"label": "naive_per", "agent.variant": "naive_per"}),
        json!({"label": "naive_per_no_replacement", "agent.variant": "naive_per", "buffer.replacement": false}),
        json!({"label": "naive_per_recompute", "agent.variant": "naive_per", "buffer.recompute_every": 10}),
        json!({"label": "modified_per", "agent.variant": "naive_per",
               "buffer.replacement": false, "buffer.recompute_every": 10}),
    ]
}

/// `(name, description)` of every preset.
pub fn preset_names() -> Vec<(&'static str, &'static str)> {
    registry().into_iter().map(|(n, d, _)| (n, d)).collect()
}

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    registry()
        .into_iter()
        .find(|(n, _, _)| *n == name)
        .map(|(_, _, build)| build())
        .ok_or_else(|| Error::UnknownPreset {
            name: name.to_string(),
            available: preset_names().iter().map(|(n, _)| *n).collect::<Vec<_>>().join(", "),
        })
}
