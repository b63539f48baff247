//! Plot-ready result files: per-run JSON lines, heatmap CSVs, experiment
//! metadata and directory-level summaries.

mod aggregate;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::RunResult;
use crate::metrics::{HeatmapKind, HeatmapSeries, MetricId, MetricSeries};

pub use aggregate::{aggregate_dir, write_summary, Aggregate, ConfigInterval, SummaryRow};

pub const RUN_FORMAT: &str = "replaylab-run";
pub const FORMAT_VERSION: u32 = 1;
pub const HEATMAP_ROW_TOLERANCE: f64 = 1e-9;

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `bytes` to a temporary sibling and renames it over `path`.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            message: "not a file path".into(),
        })?
        .to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if let Err(e) = result {
        let _ = fs::remove_file(&tmp);
        return Err(Error::io(path, e));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesInfo {
    pub metric: MetricId,
    pub cadence: u64,
}

/// First line of every run file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub format: String,
    pub version: u32,
    pub config_hash: String,
    pub seed: u64,
    pub episodes: u64,
    pub series: Vec<SeriesInfo>,
    #[serde(default)]
    pub heatmaps: Vec<HeatmapKind>,
}

/// Paths produced by [`write_run`].
#[derive(Clone, Debug, PartialEq)]
pub struct RunFiles {
    pub run: PathBuf,
    pub heatmaps: Vec<PathBuf>,
}

pub fn run_file_name(config_hash: &str, seed: u64) -> String {
    format!("{config_hash}_seed{seed}.jsonl")
}

pub fn heatmap_file_name(config_hash: &str, seed: u64, kind: HeatmapKind) -> String {
    format!("{config_hash}_seed{seed}_{}.csv", kind.name())
}

pub fn render_run(result: &RunResult) -> Result<String> {
    let header = RunHeader {
        format: RUN_FORMAT.into(),
        version: FORMAT_VERSION,
        config_hash: result.config_hash.clone(),
        seed: result.seed,
        episodes: result.episodes,
        series: result
            .series
            .iter()
            .map(|s| SeriesInfo {
                metric: s.metric,
                cadence: s.cadence,
            })
            .collect(),
        heatmaps: result.heatmaps.iter().map(|h| h.kind).collect(),
    };
    let mut out = serde_json::to_string(&header).expect("header serialises");
    out.push('\n');
    for s in &result.series {
        for (k, v) in s.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFinite("series value"));
            }
            out.push_str(&format!(
                "{{\"step\":{},\"metric\":\"{}\",\"value\":{}}}\n",
                s.step_of(k),
                s.metric.name(),
                fmt_f64(*v)
            ));
        }
    }
    Ok(out)
}

pub fn render_heatmap(h: &HeatmapSeries) -> Result<String> {
    let width = h.rows.first().map_or(crate::env::chain::NUM_STATES, Vec::len);
    let mut out = String::from("snapshot_step");
    for i in 1..=width {
        out.push_str(&format!(",state_{i}"));
    }
    out.push('\n');
    for (step, row) in h.steps.iter().zip(&h.rows) {
        if row.len() != width {
            return Err(Error::Dimension {
                expected: width,
                got: row.len(),
            });
        }
        out.push_str(&step.to_string());
        for v in row {
            if !v.is_finite() {
                return Err(Error::NonFinite("heatmap value"));
            }
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push('\n');
    }
    Ok(out)
}

/// Writes the run file and one CSV per heatmap into `dir`.
pub fn write_run(result: &RunResult, dir: &Path) -> Result<RunFiles> {
    let run = dir.join(run_file_name(&result.config_hash, result.seed));
    let mut heatmaps = Vec::new();
    for h in &result.heatmaps {
        let path = dir.join(heatmap_file_name(&result.config_hash, result.seed, h.kind));
        atomic_write(&path, render_heatmap(h)?.as_bytes())?;
        heatmaps.push(path);
    }
    atomic_write(&run, render_run(result)?.as_bytes())?;
    Ok(RunFiles { run, heatmaps })
}

fn format_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

#[derive(Deserialize)]
struct Record {
    step: u64,
    metric: MetricId,
    value: f64,
}

/// Reads a run file (and its heatmap CSVs, which must sit next to it).
pub fn read_run(path: &Path) -> Result<RunResult> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut lines = BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?
        .map_err(|e| Error::io(path, e))?;
    let header: RunHeader =
        serde_json::from_str(&first).map_err(|e| format_err(path, format!("header: {e}")))?;
    if header.format != RUN_FORMAT || header.version != FORMAT_VERSION {
        return Err(format_err(path, "unsupported format or version"));
    }
    let mut series: BTreeMap<MetricId, MetricSeries> = header
        .series
        .iter()
        .map(|i| (i.metric, MetricSeries::new(i.metric, i.cadence)))
        .collect();
    for (n, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line)
            .map_err(|e| format_err(path, format!("line {}: {e}", n + 2)))?;
        let s = series
            .get_mut(&rec.metric)
            .ok_or_else(|| format_err(path, format!("line {}: metric not in header", n + 2)))?;
        if rec.step != s.step_of(s.values.len()) {
            return Err(format_err(path, format!("line {}: unexpected step {}", n + 2, rec.step)));
        }
        s.values.push(rec.value);
    }
    let dir = path.parent().unwrap_or(Path::new("."));
    let heatmaps = header
        .heatmaps
        .iter()
        .map(|&k| read_heatmap(&dir.join(heatmap_file_name(&header.config_hash, header.seed, k)), k))
        .collect::<Result<Vec<_>>>()?;
    Ok(RunResult {
        config_hash: header.config_hash,
        seed: header.seed,
        series: header
            .series
            .iter()
            .map(|i| series.remove(&i.metric).expect("built from header"))
            .collect(),
        heatmaps,
        episodes: header.episodes,
        wall_clock_secs: 0.0,
    })
}

/// Parses a heatmap CSV; sampling-probability rows must sum to 1.
pub fn read_heatmap(path: &Path, kind: HeatmapKind) -> Result<HeatmapSeries> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| format_err(path, "missing header"))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"snapshot_step")
        || cols[1..].iter().enumerate().any(|(i, c)| *c != format!("state_{}", i + 1))
    {
        return Err(format_err(path, "unexpected header"));
    }
    let mut h = HeatmapSeries::new(kind);
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(format_err(path, format!("row {}: wrong column count", n + 1)));
        }
        let step = fields[0]
            .parse()
            .map_err(|_| format_err(path, format!("row {}: bad step", n + 1)))?;
        let row = fields[1..]
            .iter()
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| format_err(path, format!("row {}: bad number", n + 1)))?;
        h.push(step, row);
    }
    h.check_rows(HEATMAP_ROW_TOLERANCE)
        .map_err(|e| format_err(path, e.to_string()))?;
    Ok(h)
}

/// Experiment-level metadata: the config echo, code version and timing.
/// Kept out of per-run files so those stay byte-identical across reruns.
pub fn write_metadata(dir: &Path, config_toml: &str, extra: serde_json::Value) -> Result<PathBuf> {
    let now = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let meta = serde_json::json!({
        "format": "replaylab-metadata",
        "version": FORMAT_VERSION,
        "code_version": env!("CARGO_PKG_VERSION"),
        "written_unix_secs": now,
        "aggregation": "mean over seeds of the per-run time average (AUC)",
        "config_toml": config_toml,
        "extra": extra,
    });
    let path = dir.join("metadata.json");
    let text = serde_json::to_string_pretty(&meta).expect("metadata serialises");
    atomic_write(&path, text.as_bytes())?;
    Ok(path)
}
