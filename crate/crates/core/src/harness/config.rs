//! Experiment configuration: TOML schema, validation, environment-variable
//! overrides and dotted-path edits used by sweeps.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::agents::{AgentSpec, LearnerKind, ReplayVariant, RepresentationKind};
use crate::approx::{adam, OptimizerKind};
use crate::env::{EnvKind, EnvSpec};
use crate::error::{Error, Result};
use crate::metrics::{HeatmapKind, MetricId, DEFAULT_CADENCE};
use crate::replay::DmPerParams;

pub const ENV_PREFIX: &str = "REPLAYLAB_";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentSection {
    pub kind: LearnerKind,
    pub variant: ReplayVariant,
    pub representation: RepresentationKind,
    #[serde(default = "default_hidden")]
    pub hidden: usize,
    pub learning_rate: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eper_learning_rate: Option<f64>,
    pub batch_size: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_refresh: Option<u64>,
    #[serde(default)]
    pub recompute_with_online: bool,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BufferSection {
    pub capacity: usize,
    #[serde(default = "default_true")]
    pub replacement: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recompute_every: Option<u64>,
    #[serde(default)]
    pub dm_per: DmPerParams,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SelectSection {
    #[serde(default = "default_stage1")]
    pub stage1_seeds: usize,
    #[serde(default = "default_stage2")]
    pub stage2_seeds: usize,
    /// First stage-2 seed; stage 1 uses `0..stage1_seeds`.
    #[serde(default = "default_stage2_offset")]
    pub stage2_offset: u64,
    /// Sweep axes maximised over; the remaining axes define the groups
    /// that are selected independently.
    #[serde(default = "default_select_over")]
    pub over: Vec<String>,
}

impl Default for SelectSection {
    fn default() -> Self {
        Self {
            stage1_seeds: default_stage1(),
            stage2_seeds: default_stage2(),
            stage2_offset: default_stage2_offset(),
            over: default_select_over(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    /// Number of environment steps `T`.
    pub horizon: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_cadence")]
    pub cadence: u64,
    /// Metrics to record; the first drives selection. Inferred when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub metrics: Vec<MetricId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smoothing_window: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub heatmaps: Vec<HeatmapKind>,
    #[serde(default = "default_heatmap_every")]
    pub heatmap_every: u64,
    pub env: EnvSpec,
    pub agent: AgentSection,
    pub buffer: BufferSection,
    #[serde(default)]
    pub output: OutputSection,
    /// Sweep axes: dotted config path to the list of values it takes. Keys
    /// starting with `+` are bundles whose values are tables of
    /// `path = value` assignments plus an optional `label`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub sweep: BTreeMap<String, Vec<Value>>,
    #[serde(default)]
    pub select: SelectSection,
}

fn default_hidden() -> usize {
    32
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_adam_eps() -> f64 {
    adam::DEFAULT_EPS
}
fn default_true() -> bool {
    true
}
fn default_stage1() -> usize {
    30
}
fn default_stage2() -> usize {
    100
}
fn default_stage2_offset() -> u64 {
    10_000
}
fn default_select_over() -> Vec<String> {
    vec!["agent.learning_rate".into()]
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_cadence() -> u64 {
    DEFAULT_CADENCE
}
fn default_heatmap_every() -> u64 {
    1000
}

impl ExperimentConfig {
    pub fn agent_spec(&self) -> AgentSpec {
        let a = &self.agent;
        AgentSpec {
            kind: a.kind,
            variant: a.variant,
            representation: a.representation,
            hidden: a.hidden,
            learning_rate: a.learning_rate,
            eper_learning_rate: a.eper_learning_rate,
            batch_size: a.batch_size,
            capacity: self.buffer.capacity,
            replacement: self.buffer.replacement,
            recompute_every: self.buffer.recompute_every,
            target_refresh: a.target_refresh,
            recompute_with_online: a.recompute_with_online,
            epsilon: a.epsilon,
            optimizer: a.optimizer,
            adam_eps: a.adam_eps,
            dm_per: self.buffer.dm_per,
        }
    }

    /// Recorded metrics, the selection metric first.
    pub fn metric_ids(&self) -> Vec<MetricId> {
        if !self.metrics.is_empty() {
            return self.metrics.clone();
        }
        match (self.agent.kind, self.env.kind) {
            (LearnerKind::PredictionTd0, _) => vec![MetricId::Msve],
            (_, EnvKind::Chain) => vec![MetricId::StepsToGoal],
            _ => vec![MetricId::EpisodicReturn, MetricId::StepsToGoal],
        }
    }

    pub fn primary_metric(&self) -> MetricId {
        self.metric_ids()[0]
    }

    /// Every problem found, each tagged with its field path.
    pub fn problems(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut bad = |p: &str, m: &str| out.push((p.to_string(), m.to_string()));
        if self.name.trim().is_empty() {
            bad("name", "must not be empty");
        }
        if self.cadence == 0 {
            bad("cadence", "must be >= 1");
        }
        if self.heatmap_every == 0 {
            bad("heatmap_every", "must be >= 1");
        }
        if self.seeds.is_empty() {
            bad("seeds", "at least one seed is required");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            bad("seeds", "seeds must be distinct");
        }
        if self.smoothing_window == Some(0) {
            bad("smoothing_window", "must be >= 1 when present");
        }
        if let Err(e) = self.env.validate() {
            match e {
                Error::Config { path, message } => bad(&path, &message),
                other => bad("env", &other.to_string()),
            }
        }
        if self.env.cutoff.is_some() && matches!(self.env.kind, EnvKind::Chain | EnvKind::Cliffworld) {
            bad("env.cutoff", "only the classic-control tasks have an episode cutoff");
        }
        if let Err((p, m)) = self.agent_spec().validate() {
            bad(&p, &m);
        }
        let prediction = self.agent.kind == LearnerKind::PredictionTd0;
        if prediction && self.env.kind != EnvKind::Chain {
            bad("agent.kind", "prediction is only defined on the chain");
        }
        if self.agent.representation == RepresentationKind::Tabular
            && matches!(
                self.env.kind,
                EnvKind::Mountaincar | EnvKind::Acrobot | EnvKind::Cartpole
            )
        {
            bad("agent.representation", "continuous-state tasks need an mlp");
        }
        for m in self.metric_ids() {
            if (m == MetricId::Msve) != prediction {
                bad("metrics", &format!("{} does not apply to this agent kind", m.name()));
            }
        }
        for h in &self.heatmaps {
            let ok = self.env.kind == EnvKind::Chain
                && prediction
                && !(*h == HeatmapKind::SamplingProbability
                    && self.env.chain_encoding != crate::env::ChainEncoding::OneHot);
            if !ok {
                bad(
                    "heatmaps",
                    &format!("{} heatmaps need chain prediction with one-hot states", h.name()),
                );
            }
        }
        if self.select.stage1_seeds == 0 || self.select.stage2_seeds == 0 {
            bad("select", "stage seed counts must be >= 1");
        }
        if self.select.stage2_offset < self.select.stage1_seeds as u64 {
            bad(
                "select.stage2_offset",
                "stage-2 seeds would overlap stage-1 seeds",
            );
        }
        for (path, values) in &self.sweep {
            if values.is_empty() {
                bad(&format!("sweep.{path}"), "axis has no values");
            }
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let problems = self.problems();
        if problems.is_empty() {
            return Ok(());
        }
        let path = problems
            .iter()
            .map(|(p, _)| p.as_str())
            .collect::<Vec<_>>()
            .join(", ");
        let message = problems
            .iter()
            .map(|(p, m)| format!("{p}: {m}"))
            .collect::<Vec<_>>()
            .join("; ");
        Err(Error::Config { path, message })
    }

    /// First 16 hex digits of the SHA-256 of the canonical JSON form,
    /// ignoring seeds, output location, sweep axes and selection settings.
    pub fn hash(&self) -> String {
        let mut v = serde_json::to_value(self).expect("config serialises");
        if let Value::Object(map) = &mut v {
            for k in ["seeds", "output", "sweep", "select"] {
                map.remove(k);
            }
        }
        let canonical = serde_json::to_string(&v).expect("value serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(digest)[..16].to_string()
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("config serialises")
    }

    pub fn from_value(v: Value) -> Result<Self> {
        let cfg: Self = serde_json::from_value(v).map_err(|e| Error::config("<config>", e.to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serialises to TOML")
    }

    /// Parses TOML text, applies `overrides` (dotted path, raw value) and
    /// validates.
    pub fn from_toml_with(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let doc: toml::Value = toml::from_str(text).map_err(|e| Error::config("<toml>", e.to_string()))?;
        let mut v = serde_json::to_value(doc).map_err(|e| Error::config("<toml>", e.to_string()))?;
        apply_overrides(&mut v, overrides)?;
        let cfg = Self::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies `(dotted path, raw value)` overrides and revalidates.
    pub fn with_overrides(&self, overrides: &[(String, String)]) -> Result<Self> {
        let mut v = self.to_value();
        apply_overrides(&mut v, overrides)?;
        let cfg = Self::from_value(v)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        Self::from_toml_with(text, &[])
    }

    /// Loads a file and applies `REPLAYLAB_*` environment overrides.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_with(&text, &env_overrides(std::env::vars()))
    }
}

/// `REPLAYLAB_AGENT__LEARNING_RATE=0.01` becomes `("agent.learning_rate", "0.01")`.
pub fn env_overrides(vars: impl IntoIterator<Item = (String, String)>) -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = vars
        .into_iter()
        .filter_map(|(k, v)| {
            let rest = k.strip_prefix(ENV_PREFIX)?;
            if rest.is_empty() {
                return None;
            }
            Some((rest.to_ascii_lowercase().replace("__", "."), v))
        })
        .collect();
    out.sort();
    out
}

/// `sweep.<axis>` keeps the dotted axis name as a single key.
fn apply_overrides(v: &mut Value, overrides: &[(String, String)]) -> Result<()> {
    for (path, raw) in overrides {
        let value = parse_scalar(raw);
        match path.strip_prefix("sweep.") {
            Some(axis) if !axis.is_empty() => {
                let map = v
                    .as_object_mut()
                    .ok_or_else(|| Error::config(path, "config is not a table"))?;
                let sweep = map
                    .entry("sweep")
                    .or_insert_with(|| Value::Object(Default::default()));
                sweep
                    .as_object_mut()
                    .ok_or_else(|| Error::config("sweep", "not a table"))?
                    .insert(axis.to_string(), value);
            }
            _ => set_path(v, path, value, true)?,
        }
    }
    Ok(())
}

/// Interprets an override as a TOML value, falling back to a string.
pub fn parse_scalar(raw: &str) -> Value {
    #[derive(Deserialize)]
    struct Wrap {
        v: toml::Value,
    }
    match toml::from_str::<Wrap>(&format!("v = {raw}")) {
        Ok(w) => serde_json::to_value(w.v).unwrap_or(Value::String(raw.to_string())),
        Err(_) => Value::String(raw.to_string()),
    }
}

/// Sets `path` (dot separated) inside a JSON object tree. Without
/// `create`, every segment must already exist.
pub fn set_path(root: &mut Value, path: &str, value: Value, create: bool) -> Result<()> {
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(Error::config(path, "malformed path"));
    }
    let mut node = root;
    for (i, seg) in segments.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| Error::config(path, format!("`{}` is not a table", segments[..i].join("."))))?;
        let last = i + 1 == segments.len();
        if !map.contains_key(*seg) {
            if !create {
                return Err(Error::config(path, "no such config field"));
            }
            let fresh = if last { Value::Null } else { Value::Object(Default::default()) };
            map.insert((*seg).to_string(), fresh);
        }
        let child = map.get_mut(*seg).expect("just ensured");
        if last {
            *child = value;
            return Ok(());
        }
        node = child;
    }
    unreachable!("loop returns on the last segment")
}

/// Whether `path` names a field of the config schema (optional fields
/// included), checked by deserialising a probe.
pub fn path_exists(base: &ExperimentConfig, path: &str) -> bool {
    let mut v = base.to_value();
    let mut node = &v;
    let mut present = true;
    for seg in path.split('.') {
        match node.get(seg) {
            Some(n) => node = n,
            None => {
                present = false;
                break;
            }
        }
    }
    if present {
        return true;
    }
    // Optional fields are skipped when unset; probe by setting a value and
    // checking that deserialisation does not reject the field name.
    if set_path(&mut v, path, Value::Null, true).is_err() {
        return false;
    }
    match serde_json::from_value::<ExperimentConfig>(v) {
        Ok(_) => true,
        Err(e) => !e.to_string().contains("unknown field"),
    }
}
