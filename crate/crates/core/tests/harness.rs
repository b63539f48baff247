use std::collections::BTreeMap;
use std::fs;
use std::process::{Command, Stdio};

use rand::Rng;
use rand_distr::StandardNormal;

use replaylab::harness::sweep::{best_cell, expand, run_jobs, sweep_with, two_stage_select_with, Job};
use replaylab::harness::{preset, run, ExperimentConfig, RunResult};
use replaylab::io;
use replaylab::metrics::{bootstrap_ci, MetricId, MetricSeries, DEFAULT_RESAMPLES};
use replaylab::rng;

fn small_prediction(horizon: u64) -> ExperimentConfig {
    let mut c = preset("fig3_chain_pred_tabular").unwrap();
    c.heatmaps.clear();
    c.sweep.clear();
    c.horizon = horizon;
    c
}

fn lr_axis(c: &mut ExperimentConfig, lrs: &[f64]) {
    c.sweep.insert(
        "agent.learning_rate".into(),
        lrs.iter().map(|&x| x.into()).collect(),
    );
}

/// Run whose MSVE is constant at `truth(lr) + noise(seed)`.
fn synthetic(truth: impl Fn(f64) -> f64 + Sync, noise: f64) -> impl Fn(&ExperimentConfig, u64) -> replaylab::Result<RunResult> + Sync {
    move |cfg, seed| {
        let hash = cfg.hash();
        let mut r = rng::stream(seed, &hash);
        let value = truth(cfg.agent.learning_rate) + noise * r.sample::<f64, _>(StandardNormal);
        let mut s = MetricSeries::new(MetricId::Msve, cfg.cadence);
        s.values = vec![value; 4];
        Ok(RunResult {
            config_hash: hash,
            seed,
            series: vec![s],
            heatmaps: vec![],
            episodes: 0,
            wall_clock_secs: 0.0,
        })
    }
}

#[test]
fn sweep_counts_runs_and_cells() {
    let mut c = small_prediction(400);
    let lrs = [1e-4, 1e-3, 1e-2, 1e-1, 0.5];
    lr_axis(&mut c, &lrs);
    let seeds: Vec<u64> = (0..30).collect();
    let out = sweep_with(&c, &seeds, 2, synthetic(|lr| lr, 0.1), |_| {}).unwrap();
    assert_eq!(out.results.len(), 150);
    assert_eq!(out.cells.len(), 5);
    assert!(out.cells.iter().all(|c| c.per_seed.len() == 30));
}

#[test]
fn single_cell_sweep_equals_repeated_runs() {
    let c = small_prediction(3000);
    let seeds = [3, 1, 2];
    let out = sweep_with(&c, &seeds, 2, run, |_| {}).unwrap();
    assert_eq!(out.cells.len(), 1);
    for s in seeds {
        let direct = run(&c, s).unwrap();
        let swept = out.results.iter().find(|r| r.seed == s).unwrap();
        assert!(direct.same_outcome(swept));
    }
}

#[test]
fn parallel_and_serial_sweeps_agree() {
    let mut c = small_prediction(3000);
    c.sweep.insert("agent.variant".into(), vec!["uniform".into(), "naive_per".into(), "eper".into()]);
    let seeds = [0, 1];
    let serial = sweep_with(&c, &seeds, 1, run, |_| {}).unwrap();
    let parallel = sweep_with(&c, &seeds, 4, run, |_| {}).unwrap();
    assert_eq!(serial.results.len(), parallel.results.len());
    for (a, b) in serial.results.iter().zip(&parallel.results) {
        assert!(a.same_outcome(b));
    }
    assert_eq!(serial.cells, parallel.cells);
}

#[test]
fn best_cell_matches_reaggregation_from_files() {
    let mut c = small_prediction(6000);
    lr_axis(&mut c, &[8f64.powi(-5), 8f64.powi(-3), 8f64.powi(-2)]);
    let seeds = [0, 1, 2];
    let out = sweep_with(&c, &seeds, 1, run, |_| {}).unwrap();
    let dir = tempfile::tempdir().unwrap();
    for r in &out.results {
        io::write_run(r, dir.path()).unwrap();
    }
    let agg = io::aggregate_dir(dir.path()).unwrap();
    assert!(agg.warnings.is_empty());
    let mut sums: BTreeMap<&str, (f64, usize)> = BTreeMap::new();
    for row in &agg.rows {
        let e = sums.entry(&row.config_hash).or_default();
        e.0 += row.auc;
        e.1 += 1;
    }
    let (best_hash, _) = sums
        .iter()
        .map(|(h, (s, n))| (*h, s / *n as f64))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let refs: Vec<_> = out.cells.iter().collect();
    let (w, _) = best_cell(&refs).unwrap();
    assert_eq!(out.cells[w].config_hash, best_hash);
}

#[test]
fn ties_prefer_the_smaller_learning_rate() {
    let mut c = small_prediction(400);
    lr_axis(&mut c, &[0.3, 0.01, 0.1]);
    let out = sweep_with(&c, &[0, 1], 1, synthetic(|_| 1.0, 0.0), |_| {}).unwrap();
    let refs: Vec<_> = out.cells.iter().collect();
    let (w, tie) = best_cell(&refs).unwrap();
    assert!(tie);
    assert_eq!(out.cells[w].learning_rate, 0.01);
}

#[test]
fn one_cell_selection_is_the_stage_two_aggregate() {
    let c = small_prediction(400);
    let runner = synthetic(|_| 2.0, 0.5);
    let sel = two_stage_select_with(&c, &[0, 1, 2], &[100, 101], 1, &runner, |_| {}).unwrap();
    assert_eq!(sel.groups.len(), 1);
    let g = &sel.groups[0];
    assert_eq!(g.winner, 0);
    let direct: f64 = [100, 101]
        .iter()
        .map(|&s| runner(&c, s).unwrap().series[0].auc())
        .sum::<f64>()
        / 2.0;
    assert_eq!(g.stage2.mean_auc, direct);
    assert_eq!(sel.stage2_results.len(), 2);
}

#[test]
fn overlapping_stage_seeds_are_rejected() {
    let c = small_prediction(400);
    let err = two_stage_select_with(&c, &[0, 1], &[1, 2], 1, synthetic(|_| 0.0, 0.0), |_| {}).unwrap_err();
    assert!(err.is_config());
}

#[test]
fn stage_two_removes_maximisation_bias() {
    // Twenty equally good learning rates: the stage-1 winner only looks
    // better by luck, and fresh seeds pull it back to the truth.
    let mut c = small_prediction(400);
    let lrs: Vec<f64> = (1..=20).map(|i| i as f64 * 1e-3).collect();
    lr_axis(&mut c, &lrs);
    let truth = 1.0;
    let s1: Vec<u64> = (0..5).collect();
    let s2: Vec<u64> = (1000..1400).collect();
    let sel = two_stage_select_with(&c, &s1, &s2, 2, synthetic(|_| truth, 1.0), |_| {}).unwrap();
    let g = &sel.groups[0];
    let stage1 = g.stage1[g.winner].mean_auc;
    let stage2 = g.stage2.mean_auc;
    assert!(truth - stage1 > 0.5, "stage-1 winner {stage1}");
    assert!((stage2 - truth).abs() < 4.0 / (s2.len() as f64).sqrt(), "stage 2 {stage2}");
    assert!((stage2 - truth).abs() < (stage1 - truth).abs());
}

#[test]
fn grouped_selection_picks_per_group() {
    let mut c = small_prediction(400);
    lr_axis(&mut c, &[0.1, 0.2]);
    c.sweep.insert("agent.variant".into(), vec!["uniform".into(), "naive_per".into()]);
    let runner = synthetic(|lr| (lr - 0.2).abs(), 0.0);
    let sel = two_stage_select_with(&c, &[0], &[5], 1, runner, |_| {}).unwrap();
    assert_eq!(sel.groups.len(), 2);
    for g in &sel.groups {
        assert_eq!(g.stage2.learning_rate, 0.2);
    }
}

#[test]
fn run_jobs_reports_the_failing_cell() {
    let c = small_prediction(400);
    let jobs: Vec<Job> = vec![("ok".into(), c.clone(), 0), ("bad".into(), c, 1)];
    let err = run_jobs(
        &jobs,
        2,
        |_, seed| if seed == 1 { Err(replaylab::Error::NonFinite("test")) } else { synthetic(|_| 0.0, 0.0)(&small_prediction(400), seed) },
        |_| {},
    )
    .unwrap_err();
    assert!(err.to_string().contains("bad"), "{err}");
}

#[test]
fn every_preset_expands_into_labelled_cells() {
    for (name, _) in replaylab::harness::preset_names() {
        let cells = expand(&preset(name).unwrap()).unwrap();
        let mut labels: Vec<_> = cells.iter().map(|c| c.label.clone()).collect();
        labels.dedup();
        assert_eq!(labels.len(), cells.len(), "{name}");
    }
}

#[test]
fn aggregation_is_order_independent_and_matches_direct_ci() {
    let c = small_prediction(400);
    let runner = synthetic(|_| 1.0, 0.3);
    let results: Vec<RunResult> = (0..30).map(|s| runner(&c, s).unwrap()).collect();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for r in &results {
        io::write_run(r, a.path()).unwrap();
    }
    for r in results.iter().rev() {
        io::write_run(r, b.path()).unwrap();
    }
    let (pa, agg) = io::write_summary(a.path()).unwrap();
    let (pb, _) = io::write_summary(b.path()).unwrap();
    assert_eq!(fs::read(pa).unwrap(), fs::read(pb).unwrap());
    assert_eq!(agg.rows.len(), 30);

    let aucs: Vec<f64> = agg.rows.iter().map(|r| r.auc).collect();
    let mut r = rng::stream(0, &format!("bootstrap:{}", c.hash()));
    let (lo, mean, hi) = bootstrap_ci(&aucs, 0.95, DEFAULT_RESAMPLES, &mut r).unwrap();
    let ci = &agg.intervals[&c.hash()];
    assert_eq!((ci.lo, ci.mean, ci.hi), (lo, mean, hi));
    assert!(lo < 1.0 && 1.0 < hi);
}

#[test]
fn mixed_configs_are_grouped_by_hash() {
    let dir = tempfile::tempdir().unwrap();
    let mut c2 = small_prediction(400);
    c2.agent.learning_rate = 0.5;
    let c1 = small_prediction(400);
    for (c, n) in [(&c1, 3), (&c2, 2)] {
        let runner = synthetic(|lr| lr, 0.1);
        for s in 0..n {
            io::write_run(&runner(c, s).unwrap(), dir.path()).unwrap();
        }
    }
    let agg = io::aggregate_dir(dir.path()).unwrap();
    assert_eq!(agg.intervals.len(), 2);
    assert_eq!(agg.intervals[&c1.hash()].seeds, 3);
    assert_eq!(agg.intervals[&c2.hash()].seeds, 2);
}

#[test]
fn repeated_runs_write_identical_bytes() {
    let mut c = preset("fig3_chain_pred_nn").unwrap();
    c.sweep.clear();
    c.agent.variant = replaylab::agents::ReplayVariant::Eper;
    c.horizon = 3000;
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let fa = io::write_run(&run(&c, 5).unwrap(), a.path()).unwrap();
    let fb = io::write_run(&run(&c, 5).unwrap(), b.path()).unwrap();
    assert_eq!(fs::read(&fa.run).unwrap(), fs::read(&fb.run).unwrap());
    assert_eq!(fa.heatmaps.len(), 2);
    for (x, y) in fa.heatmaps.iter().zip(&fb.heatmaps) {
        assert_eq!(fs::read(x).unwrap(), fs::read(y).unwrap());
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_replaylab"))
}

fn quiet_cli() -> Command {
    let mut c = cli();
    c.stdout(Stdio::null()).stderr(Stdio::null());
    c
}

#[test]
fn cli_runs_aggregates_and_reports_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let status = quiet_cli()
        .args(["run", "--preset", "fig3_chain_pred_tabular", "--seed", "2", "--set", "horizon=1000", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(status.success());
    assert!(out.join("metadata.json").exists());
    let runs: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "jsonl"))
        .collect();
    assert_eq!(runs.len(), 1);

    let status = quiet_cli().args(["aggregate", "--dir"]).arg(&out).status().unwrap();
    assert!(status.success());
    assert!(out.join("summary.csv").exists());
    fs::write(out.join("broken.jsonl"), "{").unwrap();
    let status = quiet_cli().args(["aggregate", "--dir"]).arg(&out).status().unwrap();
    assert_eq!(status.code(), Some(3));

    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, preset("fig3_chain_pred_tabular").unwrap().to_toml().replace("batch_size = 8", "batch_size = 0")).unwrap();
    let status = quiet_cli().args(["run", "--config"]).arg(&cfg).status().unwrap();
    assert_eq!(status.code(), Some(2));

    let good = tmp.path().join("good.toml");
    fs::write(&good, preset("fig3_chain_pred_tabular").unwrap().to_toml()).unwrap();
    let status = quiet_cli()
        .args(["run", "--config"])
        .arg(&good)
        .env("REPLAYLAB_AGENT__LEARNING_RATE", "-1")
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));

    let status = quiet_cli().args(["run", "--preset", "no_such_preset"]).status().unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn cli_lists_and_dumps_presets() {
    let out = cli().arg("presets").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("fig11_cartpole"));
    let dump = cli().args(["presets", "--dump", "fig5_target_nets"]).output().unwrap();
    let parsed = ExperimentConfig::from_toml(&String::from_utf8(dump.stdout).unwrap()).unwrap();
    assert_eq!(parsed, preset("fig5_target_nets").unwrap());
}
