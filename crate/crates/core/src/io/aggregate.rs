use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::{bootstrap_ci, MetricId, DEFAULT_RESAMPLES};
use crate::rng;

use super::{atomic_write, fmt_f64, read_run};

pub const CI_LEVEL: f64 = 0.95;

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub config_hash: String,
    pub seed: u64,
    pub metric: MetricId,
    pub auc: f64,
    pub final_value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigInterval {
    pub seeds: usize,
    pub lo: f64,
    pub mean: f64,
    pub hi: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Aggregate {
    /// Sorted by (config hash, seed).
    pub rows: Vec<SummaryRow>,
    /// Bootstrap CI over per-seed AUCs, keyed by config hash.
    pub intervals: BTreeMap<String, ConfigInterval>,
    pub warnings: Vec<String>,
}

impl Aggregate {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("config_hash,seed,metric,auc,final,seeds,ci_lo,ci_mean,ci_hi\n");
        for r in &self.rows {
            let ci = &self.intervals[&r.config_hash];
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.config_hash,
                r.seed,
                r.metric.name(),
                fmt_f64(r.auc),
                fmt_f64(r.final_value),
                ci.seeds,
                fmt_f64(ci.lo),
                fmt_f64(ci.mean),
                fmt_f64(ci.hi)
            ));
        }
        out
    }
}

/// Reads every run file in `dir` (not recursive) and summarises the first
/// metric of each. Unreadable files become warnings instead of errors.
pub fn aggregate_dir(dir: &Path) -> Result<Aggregate> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();

    let mut agg = Aggregate::default();
    let mut seen: BTreeMap<(String, u64), PathBuf> = BTreeMap::new();
    for path in paths {
        let run = match read_run(&path) {
            Ok(r) => r,
            Err(e) => {
                agg.warnings.push(format!("skipped {}: {e}", path.display()));
                continue;
            }
        };
        let Some(series) = run.series.first() else {
            agg.warnings.push(format!("skipped {}: no series", path.display()));
            continue;
        };
        let Some(final_value) = series.last() else {
            agg.warnings.push(format!("skipped {}: empty series", path.display()));
            continue;
        };
        let key = (run.config_hash.clone(), run.seed);
        if let Some(first) = seen.get(&key) {
            agg.warnings.push(format!(
                "skipped {}: duplicate of {}",
                path.display(),
                first.display()
            ));
            continue;
        }
        seen.insert(key, path.clone());
        agg.rows.push(SummaryRow {
            config_hash: run.config_hash,
            seed: run.seed,
            metric: series.metric,
            auc: series.auc(),
            final_value,
        });
    }
    agg.rows
        .sort_by(|a, b| (&a.config_hash, a.seed).cmp(&(&b.config_hash, b.seed)));

    let mut by_config: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in &agg.rows {
        by_config.entry(&r.config_hash).or_default().push(r.auc);
    }
    for (hash, aucs) in by_config {
        let interval = if aucs.len() == 1 {
            ConfigInterval {
                seeds: 1,
                lo: aucs[0],
                mean: aucs[0],
                hi: aucs[0],
            }
        } else {
            let mut r = rng::stream(0, &format!("bootstrap:{hash}"));
            let (lo, mean, hi) = bootstrap_ci(&aucs, CI_LEVEL, DEFAULT_RESAMPLES, &mut r)?;
            ConfigInterval {
                seeds: aucs.len(),
                lo,
                mean,
                hi,
            }
        };
        agg.intervals.insert(hash.to_string(), interval);
    }
    Ok(agg)
}

/// Aggregates `dir` and writes `summary.csv` into it.
pub fn write_summary(dir: &Path) -> Result<(PathBuf, Aggregate)> {
    let agg = aggregate_dir(dir)?;
    let path = dir.join("summary.csv");
    atomic_write(&path, agg.to_csv().as_bytes())?;
    Ok((path, agg))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::RunResult;
    use crate::io::write_run;
    use crate::metrics::MetricSeries;

    fn result(hash: &str, seed: u64, values: Vec<f64>) -> RunResult {
        let mut s = MetricSeries::new(MetricId::StepsToGoal, 100);
        s.values = values;
        RunResult {
            config_hash: hash.into(),
            seed,
            series: vec![s],
            heatmaps: vec![],
            episodes: 0,
            wall_clock_secs: 0.0,
        }
    }

    #[test]
    fn rows_intervals_and_warnings() {
        let dir = tempfile::tempdir().unwrap();
        write_run(&result("bbbb", 2, vec![4.0, 2.0]), dir.path()).unwrap();
        write_run(&result("aaaa", 1, vec![1.0, 3.0]), dir.path()).unwrap();
        write_run(&result("bbbb", 1, vec![6.0, 6.0]), dir.path()).unwrap();
        fs::write(dir.path().join("junk.jsonl"), "not json\n").unwrap();

        let agg = aggregate_dir(dir.path()).unwrap();
        assert_eq!(agg.warnings.len(), 1);
        let keys: Vec<_> = agg.rows.iter().map(|r| (r.config_hash.as_str(), r.seed)).collect();
        assert_eq!(keys, vec![("aaaa", 1), ("bbbb", 1), ("bbbb", 2)]);
        assert_eq!(agg.rows[0].auc, 2.0);
        assert_eq!(agg.rows[0].final_value, 3.0);

        let single = &agg.intervals["aaaa"];
        assert_eq!((single.lo, single.mean, single.hi), (2.0, 2.0, 2.0));
        let pair = &agg.intervals["bbbb"];
        assert_eq!(pair.mean, 4.5);
        assert!(pair.lo <= pair.mean && pair.mean <= pair.hi);
        assert!(pair.lo >= 3.0 && pair.hi <= 6.0);
    }

    #[test]
    fn idempotent() {
        let dir = tempfile::tempdir().unwrap();
        for seed in 0..4 {
            write_run(&result("cccc", seed, vec![seed as f64, 1.0]), dir.path()).unwrap();
        }
        let (p, a) = write_summary(dir.path()).unwrap();
        let first = fs::read_to_string(&p).unwrap();
        let (_, b) = write_summary(dir.path()).unwrap();
        assert_eq!(a, b);
        assert_eq!(first, fs::read_to_string(&p).unwrap());
        assert!(first.starts_with("config_hash,seed,metric,auc,final,"));
    }
}
