//! Cross-product sweeps, a bounded worker pool and two-stage selection.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::config::{path_exists, set_path, ExperimentConfig};
use super::runner::{run, RunResult};
use crate::error::{Error, Result};
use crate::metrics::MetricId;

/// One point of the cross product.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub label: String,
    /// Label restricted to the axes that are not maximised over.
    pub group: String,
    pub config: ExperimentConfig,
}

fn format_value(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

struct Axis<'a> {
    path: &'a str,
    /// `(label, assignments)` per value.
    values: Vec<(String, Vec<(String, Value)>)>,
}

fn parse_axes<'a>(base: &'a ExperimentConfig, plain: &ExperimentConfig) -> Result<Vec<Axis<'a>>> {
    let mut axes = Vec::new();
    for (path, values) in &base.sweep {
        let here = || format!("sweep.{path}");
        if values.is_empty() {
            return Err(Error::config(here(), "axis has no values"));
        }
        let mut parsed = Vec::new();
        if path.starts_with('+') {
            for (i, v) in values.iter().enumerate() {
                let map = v
                    .as_object()
                    .ok_or_else(|| Error::config(here(), "bundle values must be tables"))?;
                let mut label = format!("{}", i);
                let mut assign = Vec::new();
                for (k, x) in map {
                    if k == "label" {
                        label = format_value(x);
                    } else {
                        if !path_exists(plain, k) {
                            return Err(Error::config(format!("{}.{k}", here()), "no such config field"));
                        }
                        assign.push((k.clone(), x.clone()));
                    }
                }
                parsed.push((label, assign));
            }
        } else {
            if !path_exists(plain, path) {
                return Err(Error::config(here(), "no such config field"));
            }
            for v in values {
                parsed.push((format_value(v), vec![(path.clone(), v.clone())]));
            }
        }
        axes.push(Axis { path, values: parsed });
    }
    Ok(axes)
}

/// Expands the sweep axes of `base` into concrete configs (axes sorted by
/// key, values in listed order, last axis fastest).
pub fn expand(base: &ExperimentConfig) -> Result<Vec<Cell>> {
    let mut plain = base.clone();
    plain.sweep.clear();
    let axes = parse_axes(base, &plain)?;
    let mut cells = Vec::new();
    let mut counters = vec![0usize; axes.len()];
    loop {
        let mut v = plain.to_value();
        let mut label = Vec::new();
        let mut group = Vec::new();
        for (axis, &c) in axes.iter().zip(&counters) {
            let (value_label, assign) = &axis.values[c];
            let part = format!("{}={value_label}", axis.path);
            if !base.select.over.iter().any(|o| o == axis.path) {
                group.push(part.clone());
            }
            label.push(part);
            for (p, x) in assign {
                set_path(&mut v, p, x.clone(), true)?;
            }
        }
        let label = if label.is_empty() { "base".to_string() } else { label.join(",") };
        let config = ExperimentConfig::from_value(v).map_err(|e| Error::Cell {
            cell: label.clone(),
            source: Box::new(e),
        })?;
        config.validate().map_err(|e| Error::Cell {
            cell: label.clone(),
            source: Box::new(e),
        })?;
        cells.push(Cell {
            label,
            group: if group.is_empty() { "all".into() } else { group.join(",") },
            config,
        });
        let mut i = axes.len();
        loop {
            if i == 0 {
                return Ok(cells);
            }
            i -= 1;
            counters[i] += 1;
            if counters[i] < axes[i].values.len() {
                break;
            }
            counters[i] = 0;
        }
    }
}

/// A unit of work: `(cell label, config, seed)`.
pub type Job = (String, ExperimentConfig, u64);

/// Runs every job on at most `workers` threads. Results come back sorted
/// by `(config hash, seed)`; the first failing job is reported.
pub fn run_jobs<F, G>(jobs: &[Job], workers: usize, runner: F, on_done: G) -> Result<Vec<RunResult>>
where
    F: Fn(&ExperimentConfig, u64) -> Result<RunResult> + Sync,
    G: Fn(&RunResult) + Sync,
{
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<RunResult>> = Mutex::new(Vec::with_capacity(jobs.len()));
    let failure: Mutex<Option<(usize, Error)>> = Mutex::new(None);
    let workers = workers.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                if failure.lock().expect("lock").is_some() {
                    return;
                }
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some((_, cfg, seed)) = jobs.get(i) else {
                    return;
                };
                match runner(cfg, *seed) {
                    Ok(r) => {
                        on_done(&r);
                        results.lock().expect("lock").push(r);
                    }
                    Err(e) => {
                        let mut f = failure.lock().expect("lock");
                        if f.as_ref().is_none_or(|(j, _)| i < *j) {
                            *f = Some((i, e));
                        }
                    }
                }
            });
        }
    });
    if let Some((i, e)) = failure.into_inner().expect("lock") {
        let (label, _, seed) = &jobs[i];
        return Err(Error::Cell {
            cell: format!("{label} seed {seed}"),
            source: Box::new(e),
        });
    }
    let mut out = results.into_inner().expect("lock");
    out.sort_by(|a, b| (&a.config_hash, a.seed).cmp(&(&b.config_hash, b.seed)));
    Ok(out)
}

pub fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Aggregate of one cell over its seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub label: String,
    pub group: String,
    pub config_hash: String,
    pub metric: MetricId,
    pub learning_rate: f64,
    /// `(seed, AUC)` per run, sorted by seed.
    pub per_seed: Vec<(u64, f64)>,
    /// Mean over seeds of the per-run AUC.
    pub mean_auc: f64,
}

pub fn summarise(cell: &Cell, results: &[RunResult]) -> Result<CellSummary> {
    let hash = cell.config.hash();
    let metric = cell.config.primary_metric();
    let mut per_seed: Vec<(u64, f64)> = results
        .iter()
        .filter(|r| r.config_hash == hash)
        .map(|r| {
            r.series(metric)
                .map(|s| (r.seed, s.auc()))
                .ok_or_else(|| Error::Metric(format!("run {} lacks {}", r.seed, metric.name())))
        })
        .collect::<Result<_>>()?;
    per_seed.sort_by_key(|p| p.0);
    let mean_auc = per_seed.iter().map(|p| p.1).sum::<f64>() / per_seed.len().max(1) as f64;
    Ok(CellSummary {
        label: cell.label.clone(),
        group: cell.group.clone(),
        config_hash: hash,
        metric,
        learning_rate: cell.config.agent.learning_rate,
        per_seed,
        mean_auc,
    })
}

#[derive(Clone, Debug)]
pub struct SweepOutput {
    pub cells: Vec<CellSummary>,
    pub results: Vec<RunResult>,
}

fn jobs_for(cells: &[Cell], seeds: &[u64]) -> Vec<Job> {
    let mut jobs = Vec::new();
    for c in cells {
        for &s in seeds {
            let mut cfg = c.config.clone();
            cfg.seeds = seeds.to_vec();
            jobs.push((c.label.clone(), cfg, s));
        }
    }
    jobs
}

/// Runs every cell of `base` over `seeds`.
pub fn sweep_with<F, G>(base: &ExperimentConfig, seeds: &[u64], workers: usize, runner: F, on_done: G) -> Result<SweepOutput>
where
    F: Fn(&ExperimentConfig, u64) -> Result<RunResult> + Sync,
    G: Fn(&RunResult) + Sync,
{
    let cells = expand(base)?;
    let results = run_jobs(&jobs_for(&cells, seeds), workers, runner, on_done)?;
    let summaries = cells
        .iter()
        .map(|c| summarise(c, &results))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepOutput {
        cells: summaries,
        results,
    })
}

pub fn sweep(base: &ExperimentConfig, workers: usize) -> Result<SweepOutput> {
    sweep_with(base, &base.seeds, workers, run, |_| {})
}

/// Index of the best cell and whether a tie was broken toward the smaller
/// learning rate. Lower AUC wins unless the metric is a return.
pub fn best_cell(cells: &[&CellSummary]) -> Option<(usize, bool)> {
    let metric = cells.first()?.metric;
    let better = |a: f64, b: f64| {
        if metric.higher_is_better() {
            a > b
        } else {
            a < b
        }
    };
    let mut best = 0;
    let mut tie = false;
    for (i, c) in cells.iter().enumerate().skip(1) {
        let b = cells[best];
        if better(c.mean_auc, b.mean_auc) {
            best = i;
            tie = false;
        } else if c.mean_auc == b.mean_auc {
            tie = true;
            if c.learning_rate < b.learning_rate {
                best = i;
            }
        }
    }
    Some((best, tie))
}

#[derive(Clone, Debug)]
pub struct GroupSelection {
    pub group: String,
    /// Stage-1 summaries of this group's cells.
    pub stage1: Vec<CellSummary>,
    /// Index into `stage1` of the winner.
    pub winner: usize,
    pub tie_broken_by_learning_rate: bool,
    pub stage2: CellSummary,
}

#[derive(Clone, Debug)]
pub struct Selection {
    pub groups: Vec<GroupSelection>,
    pub stage1_seeds: Vec<u64>,
    pub stage2_seeds: Vec<u64>,
    pub stage1_results: Vec<RunResult>,
    pub stage2_results: Vec<RunResult>,
}

pub fn stage_seeds(config: &ExperimentConfig) -> Result<(Vec<u64>, Vec<u64>)> {
    let s = &config.select;
    let stage1: Vec<u64> = (0..s.stage1_seeds as u64).collect();
    let stage2: Vec<u64> = (s.stage2_offset..s.stage2_offset + s.stage2_seeds as u64).collect();
    check_disjoint(&stage1, &stage2)?;
    Ok((stage1, stage2))
}

fn check_disjoint(stage1: &[u64], stage2: &[u64]) -> Result<()> {
    if stage1.is_empty() || stage2.is_empty() {
        return Err(Error::config("select", "both stages need seeds"));
    }
    if stage2.iter().any(|s| stage1.contains(s)) {
        return Err(Error::config(
            "select.stage2_offset",
            "stage-2 seeds must be disjoint from stage-1 seeds",
        ));
    }
    Ok(())
}

/// Stage 1 sweeps every cell on `stage1` seeds; within each group the best
/// cell is rerun on the disjoint `stage2` seeds.
pub fn two_stage_select_with<F, G>(
    base: &ExperimentConfig,
    stage1: &[u64],
    stage2: &[u64],
    workers: usize,
    runner: F,
    on_done: G,
) -> Result<Selection>
where
    F: Fn(&ExperimentConfig, u64) -> Result<RunResult> + Sync,
    G: Fn(&RunResult) + Sync,
{
    check_disjoint(stage1, stage2)?;
    let cells = expand(base)?;
    let first = sweep_with(base, stage1, workers, &runner, &on_done)?;

    let mut groups: Vec<String> = Vec::new();
    for c in &cells {
        if !groups.contains(&c.group) {
            groups.push(c.group.clone());
        }
    }
    let mut winners = Vec::new();
    for g in &groups {
        let members: Vec<&CellSummary> = first.cells.iter().filter(|c| &c.group == g).collect();
        let (w, tie) = best_cell(&members).expect("groups are non-empty");
        let cell = cells
            .iter()
            .find(|c| c.label == members[w].label)
            .expect("winner comes from the same expansion");
        winners.push((g.clone(), members.into_iter().cloned().collect::<Vec<_>>(), w, tie, cell));
    }

    let finalists: Vec<Cell> = winners.iter().map(|w| w.4.clone()).collect();
    let stage2_results = run_jobs(&jobs_for(&finalists, stage2), workers, &runner, &on_done)?;
    let groups = winners
        .into_iter()
        .map(|(group, stage1, winner, tie, cell)| {
            Ok(GroupSelection {
                group,
                stage1,
                winner,
                tie_broken_by_learning_rate: tie,
                stage2: summarise(cell, &stage2_results)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Selection {
        groups,
        stage1_seeds: stage1.to_vec(),
        stage2_seeds: stage2.to_vec(),
        stage1_results: first.results,
        stage2_results,
    })
}

pub fn two_stage_select(base: &ExperimentConfig, workers: usize) -> Result<Selection> {
    let (s1, s2) = stage_seeds(base)?;
    two_stage_select_with(base, &s1, &s2, workers, run, |_| {})
}
