use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use crate::agents::Agent;
use crate::env::{chain, oracle, EnvKind, EnvState, Episode, PhysicsConstants};
use crate::error::{Error, Result};
use crate::metrics::{
    msve, sampling_probability_snapshot, EpisodeTracker, HeatmapKind, HeatmapSeries, MetricId,
    MetricSeries,
};
use crate::replay::Transition;
use crate::rng::RunStreams;

/// Outcome of one `(config, seed)` run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub config_hash: String,
    pub seed: u64,
    pub series: Vec<MetricSeries>,
    pub heatmaps: Vec<HeatmapSeries>,
    pub episodes: u64,
    /// Wall-clock seconds; excluded from per-run files.
    #[serde(skip)]
    pub wall_clock_secs: f64,
}

impl RunResult {
    pub fn series(&self, metric: MetricId) -> Option<&MetricSeries> {
        self.series.iter().find(|s| s.metric == metric)
    }

    /// Equality ignoring wall-clock time.
    pub fn same_outcome(&self, other: &Self) -> bool {
        self.config_hash == other.config_hash
            && self.seed == other.seed
            && self.series == other.series
            && self.heatmaps == other.heatmaps
            && self.episodes == other.episodes
    }
}

struct ChainOracle {
    values: Vec<f64>,
    visitation: Vec<f64>,
}

fn chain_oracle() -> Result<&'static ChainOracle> {
    static CELL: OnceLock<std::result::Result<ChainOracle, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let values = oracle::chain_true_values().map_err(|e| e.to_string())?.values;
        let visitation = oracle::chain_visitation().map_err(|e| e.to_string())?.values;
        Ok(ChainOracle { values, visitation })
    })
    .as_ref()
    .map_err(|e| Error::Metric(e.clone()))
}

/// Runs `config` with `seed` using the built-in physics constants.
pub fn run(config: &ExperimentConfig, seed: u64) -> Result<RunResult> {
    run_with(config, seed, &PhysicsConstants::builtin())
}

pub fn run_with(config: &ExperimentConfig, seed: u64, constants: &PhysicsConstants) -> Result<RunResult> {
    config.validate()?;
    let started = Stopwatch::start();
    let RunStreams {
        mut env,
        mut policy,
        mut buffer,
        mut init,
        noise,
        mut eper_init,
    } = RunStreams::new(seed);

    let horizon = config.horizon;
    let environment = config.env.build(constants, noise)?;
    let mut agent = Agent::new(config.agent_spec(), environment.as_ref(), horizon, &mut init, &mut eper_init)?;
    let mut episode = Episode::new(environment, &mut env);

    let metrics = config.metric_ids();
    let cadence = config.cadence;
    let mut series: Vec<MetricSeries> = metrics.iter().map(|&m| MetricSeries::new(m, cadence)).collect();
    let mut heatmaps: Vec<HeatmapSeries> = config.heatmaps.iter().map(|&k| HeatmapSeries::new(k)).collect();
    let needs_oracle = metrics.contains(&MetricId::Msve);
    let chain_oracle = if needs_oracle { Some(chain_oracle()?) } else { None };
    let chain_states: Vec<_> = if config.env.kind == EnvKind::Chain {
        (0..chain::NUM_STATES)
            .map(|s| episode.env().features(&EnvState::discrete(s)))
            .collect()
    } else {
        Vec::new()
    };
    let chain_values = |agent: &Agent| -> Result<Vec<f64>> {
        chain_states.iter().map(|x| agent.state_value(x)).collect()
    };

    let mut lengths = EpisodeTracker::new(config.smoothing_window);
    let mut returns = EpisodeTracker::new(config.smoothing_window);
    let mut episodes = 0u64;

    for t in 0..horizon {
        if t % cadence == 0 && t / cadence < horizon / cadence {
            for s in series.iter_mut() {
                let v = match s.metric {
                    MetricId::Msve => {
                        let o = chain_oracle.expect("oracle loaded for msve");
                        msve(&chain_values(&agent)?, &o.values, &o.visitation)?
                    }
                    MetricId::StepsToGoal => lengths.current_or(horizon as f64),
                    MetricId::EpisodicReturn => returns.current_or(episode.current_return()),
                };
                s.values.push(v);
            }
        }
        if t > 0 && t % config.heatmap_every == 0 {
            for h in heatmaps.iter_mut() {
                let row = match h.kind {
                    HeatmapKind::ValueEstimates => chain_values(&agent)?,
                    HeatmapKind::SamplingProbability => {
                        let regime = agent.regime();
                        sampling_probability_snapshot(agent.buffer_mut(), &regime, chain::NUM_STATES)?
                    }
                };
                h.push(t, row);
            }
        }

        let x = episode.env().features(episode.state());
        let a = agent.act(&x, &mut policy)?;
        let step = episode.step(a, &mut env)?;
        let s_next = episode.env().features(&step.outcome.next_state);
        let transition = Transition {
            s: x,
            a,
            r: step.outcome.reward,
            s_next,
            discount: step.outcome.discount,
        };
        agent.observe(transition, &mut buffer)?;
        if let Some((_, len, ret)) = step.ended {
            lengths.complete(len as f64);
            returns.complete(ret);
            episodes += 1;
        }
    }
    if !agent.is_finite() {
        return Err(Error::NonFinite("parameters at end of run"));
    }

    Ok(RunResult {
        config_hash: config.hash(),
        seed,
        series,
        heatmaps,
        episodes,
        wall_clock_secs: started.secs(),
    })
}

/// Wall-clock timer; reads zero where the platform has no clock.
struct Stopwatch(#[cfg(not(target_arch = "wasm32"))] std::time::Instant);

impl Stopwatch {
    #[cfg(not(target_arch = "wasm32"))]
    fn start() -> Self {
        Self(std::time::Instant::now())
    }

    #[cfg(target_arch = "wasm32")]
    fn start() -> Self {
        Self()
    }

    #[cfg(not(target_arch = "wasm32"))]
    fn secs(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }

    #[cfg(target_arch = "wasm32")]
    fn secs(&self) -> f64 {
        0.0
    }
}
