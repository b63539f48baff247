//! Evaluation quantities: MSVE, steps-to-goal and return tracking,
//! percentile-bootstrap intervals and per-state heatmaps.

use std::collections::VecDeque;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Features;
use crate::error::{Error, Result};
use crate::replay::{PrioritizedBuffer, Regime};

pub const DEFAULT_CADENCE: u64 = 100;
pub const DEFAULT_RESAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricId {
    Msve,
    StepsToGoal,
    EpisodicReturn,
}

impl MetricId {
    pub fn name(self) -> &'static str {
        match self {
            Self::Msve => "msve",
            Self::StepsToGoal => "steps_to_goal",
            Self::EpisodicReturn => "episodic_return",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [Self::Msve, Self::StepsToGoal, Self::EpisodicReturn]
            .into_iter()
            .find(|m| m.name() == s)
    }

    pub fn higher_is_better(self) -> bool {
        matches!(self, Self::EpisodicReturn)
    }
}

/// Values measured at steps `0, cadence, 2·cadence, …`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSeries {
    pub metric: MetricId,
    pub cadence: u64,
    pub values: Vec<f64>,
}

impl MetricSeries {
    pub fn new(metric: MetricId, cadence: u64) -> Self {
        Self {
            metric,
            cadence,
            values: Vec::new(),
        }
    }

    pub fn step_of(&self, k: usize) -> u64 {
        k as u64 * self.cadence
    }

    /// Mean over time, the area-under-curve criterion.
    pub fn auc(&self) -> f64 {
        auc(&self.values)
    }

    pub fn last(&self) -> Option<f64> {
        self.values.last().copied()
    }
}

pub fn auc(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeatmapKind {
    ValueEstimates,
    SamplingProbability,
}

impl HeatmapKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::ValueEstimates => "value_estimates",
            Self::SamplingProbability => "sampling_probability",
        }
    }
}

/// Snapshots of a per-state quantity, one row per snapshot step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HeatmapSeries {
    pub kind: HeatmapKind,
    pub steps: Vec<u64>,
    pub rows: Vec<Vec<f64>>,
}

impl HeatmapSeries {
    pub fn new(kind: HeatmapKind) -> Self {
        Self {
            kind,
            steps: Vec::new(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, step: u64, row: Vec<f64>) {
        self.steps.push(step);
        self.rows.push(row);
    }

    /// Checks that sampling-probability rows sum to 1 within `tol`.
    pub fn check_rows(&self, tol: f64) -> Result<()> {
        if self.kind != HeatmapKind::SamplingProbability {
            return Ok(());
        }
        for (step, row) in self.steps.iter().zip(&self.rows) {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > tol {
                return Err(Error::Metric(format!(
                    "sampling row at step {step} sums to {s}"
                )));
            }
        }
        Ok(())
    }
}

/// `Σ_s d(s) (v_π(s) − v̂(s))²`.
pub fn msve(v_hat: &[f64], v_true: &[f64], d: &[f64]) -> Result<f64> {
    if v_hat.len() != v_true.len() || d.len() != v_true.len() {
        return Err(Error::Dimension {
            expected: v_true.len(),
            got: if v_hat.len() != v_true.len() {
                v_hat.len()
            } else {
                d.len()
            },
        });
    }
    Ok(v_hat
        .iter()
        .zip(v_true)
        .zip(d)
        .map(|((h, t), w)| w * (t - h) * (t - h))
        .sum())
}

/// Per-state probability that one draw picks a transition starting there.
pub fn sampling_probability_snapshot(
    buffer: &mut PrioritizedBuffer,
    regime: &Regime,
    num_states: usize,
) -> Result<Vec<f64>> {
    if buffer.is_empty() {
        return Err(Error::Metric("sampling snapshot of an empty buffer".into()));
    }
    let probs = buffer.probabilities(regime);
    let mut out = vec![0.0; num_states];
    for (slot, p) in probs.into_iter().enumerate() {
        let s = match &buffer.get(slot).expect("slot in range").s {
            Features::Index(i) if *i < num_states => *i,
            _ => {
                return Err(Error::Metric(
                    "sampling snapshot needs indexed chain states".into(),
                ))
            }
        };
        out[s] += p;
    }
    Ok(out)
}

/// Percentile bootstrap of the mean: `(lo, mean, hi)`.
pub fn bootstrap_ci<R: Rng + ?Sized>(
    values: &[f64],
    level: f64,
    resamples: usize,
    rng: &mut R,
) -> Result<(f64, f64, f64)> {
    let n = values.len();
    if n < 2 {
        return Err(Error::Metric(format!(
            "bootstrap needs at least 2 values, got {n}"
        )));
    }
    if !(level > 0.0 && level < 1.0) || resamples == 0 {
        return Err(Error::Metric("bootstrap level must lie in (0, 1)".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("bootstrap input"));
    }
    // Centering on the first value keeps constant inputs exact.
    let c = values[0];
    let shifted_mean = |sum: f64| c + sum / n as f64;
    let mean = shifted_mean(values.iter().map(|v| v - c).sum());
    let mut means: Vec<f64> = (0..resamples)
        .map(|_| {
            let s: f64 = (0..n).map(|_| values[rng.gen_range(0..n)] - c).sum();
            shifted_mean(s)
        })
        .collect();
    means.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    let lo = quantile_sorted(&means, tail).min(mean);
    let hi = quantile_sorted(&means, 1.0 - tail).max(mean);
    Ok((lo, mean, hi))
}

/// Linear-interpolated quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 >= sorted.len() || frac == 0.0 {
        sorted[i]
    } else {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    }
}

/// Reports the most recently completed episode's value, or the mean over
/// the last `window` completions when smoothing is on.
#[derive(Clone, Debug)]
pub struct EpisodeTracker {
    window: usize,
    recent: VecDeque<f64>,
    completed: u64,
}

impl EpisodeTracker {
    pub fn new(window: Option<usize>) -> Self {
        Self {
            window: window.unwrap_or(1).max(1),
            recent: VecDeque::new(),
            completed: 0,
        }
    }

    pub fn complete(&mut self, value: f64) {
        if self.recent.len() == self.window {
            self.recent.pop_front();
        }
        self.recent.push_back(value);
        self.completed += 1;
    }

    pub fn completed(&self) -> u64 {
        self.completed
    }

    /// Current report, `fallback` before the first completion.
    pub fn current_or(&self, fallback: f64) -> f64 {
        if self.recent.is_empty() {
            fallback
        } else {
            self.recent.iter().sum::<f64>() / self.recent.len() as f64
        }
    }
}

/// Steps-to-goal series from episodes given as `(step at which the episode
/// ended, length)`, sampled at `0, cadence, …` below `horizon`. Before the
/// first completion the horizon itself is reported.
pub fn steps_to_goal_tracker(
    episodes: &[(u64, usize)],
    horizon: u64,
    cadence: u64,
) -> MetricSeries {
    let mut series = MetricSeries::new(MetricId::StepsToGoal, cadence);
    let mut tracker = EpisodeTracker::new(None);
    let mut next = 0;
    let points = horizon.checked_div(cadence).unwrap_or(0);
    for k in 0..points {
        let t = k * cadence;
        while next < episodes.len() && episodes[next].0 <= t {
            tracker.complete(episodes[next].1 as f64);
            next += 1;
        }
        series.values.push(tracker.current_or(horizon as f64));
    }
    series
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::oracle;
    use crate::replay::Transition;
    use crate::rng::stream;

    #[test]
    fn msve_examples() {
        let v = oracle::chain_true_values().unwrap().values;
        let d = oracle::chain_visitation().unwrap().values;
        assert_eq!(msve(&v, &v, &d).unwrap(), 0.0);
        let zero = vec![0.0; 50];
        let want: f64 = d.iter().zip(&v).map(|(w, x)| w * x * x).sum();
        assert!((msve(&zero, &v, &d).unwrap() - want).abs() < 1e-15);
        let mut one_hot = vec![0.0; 50];
        one_hot[7] = 1.0;
        let got = msve(&zero, &v, &one_hot).unwrap();
        assert_eq!(got, v[7] * v[7]);
        assert!(msve(&zero[..3], &v, &d).is_err());
    }

    fn chain_t(s: usize) -> Transition {
        Transition {
            s: Features::Index(s),
            a: 1,
            r: 0.0,
            s_next: Features::Index(s + 1),
            discount: 0.99,
        }
    }

    #[test]
    fn uniform_snapshot_is_flat() {
        let mut b = PrioritizedBuffer::new(150);
        for _ in 0..3 {
            for s in 0..50 {
                b.insert(chain_t(s), (s + 1) as f64).unwrap();
            }
        }
        let snap = sampling_probability_snapshot(&mut b, &Regime::Uniform, 50).unwrap();
        for p in &snap {
            assert!((p - 0.02).abs() < 1e-15);
        }
    }

    #[test]
    fn dominant_priority_takes_the_mass() {
        let mut b = PrioritizedBuffer::new(50);
        for s in 0..50 {
            b.insert(chain_t(s), if s == 9 { 1e12 } else { 1.0 }).unwrap();
        }
        let snap = sampling_probability_snapshot(&mut b, &Regime::Proportional, 50).unwrap();
        assert!(snap[9] > 1.0 - 1e-9);
        assert!((snap.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_snapshot_is_an_error() {
        let mut b = PrioritizedBuffer::new(4);
        assert!(sampling_probability_snapshot(&mut b, &Regime::Uniform, 50).is_err());
    }

    #[test]
    fn bootstrap_constant_input() {
        let mut rng = stream(1, "t");
        let c = 0.123456789;
        assert_eq!(bootstrap_ci(&[c; 7], 0.95, 500, &mut rng).unwrap(), (c, c, c));
        assert!(bootstrap_ci(&[1.0], 0.95, 500, &mut rng).is_err());
    }

    #[test]
    fn bootstrap_coin_interval_shrinks() {
        let width = |n: usize| {
            let v: Vec<f64> = (0..n).map(|i| (i % 2) as f64).collect();
            let (lo, m, hi) = bootstrap_ci(&v, 0.95, 2000, &mut stream(2, "t")).unwrap();
            assert!(lo <= 0.5 && 0.5 <= hi);
            assert_eq!(m, 0.5);
            hi - lo
        };
        let (w1, w4) = (width(100), width(1600));
        assert!(w4 < w1 / 2.5, "{w1} {w4}");
    }

    #[test]
    fn bootstrap_is_deterministic_and_level_monotone() {
        let v = [0.3, 1.7, 0.2, 0.9, 1.1, 0.4];
        let a = bootstrap_ci(&v, 0.95, 1000, &mut stream(3, "t")).unwrap();
        let b = bootstrap_ci(&v, 0.95, 1000, &mut stream(3, "t")).unwrap();
        assert_eq!(a, b);
        let narrow = bootstrap_ci(&v, 0.5, 1000, &mut stream(3, "t")).unwrap();
        assert!(narrow.0 >= a.0 && narrow.2 <= a.2);
    }

    #[test]
    fn steps_to_goal_sentinel_and_carry_forward() {
        let s = steps_to_goal_tracker(&[], 500, 100);
        assert_eq!(s.values, vec![500.0; 5]);
        let s = steps_to_goal_tracker(&[(10, 10), (30, 20), (40, 10), (60, 20)], 80, 10);
        assert_eq!(s.values, vec![80.0, 10.0, 10.0, 20.0, 10.0, 10.0, 20.0, 20.0]);
    }

    #[test]
    fn smoothing_window() {
        let mut t = EpisodeTracker::new(Some(2));
        assert_eq!(t.current_or(-3.0), -3.0);
        t.complete(10.0);
        t.complete(20.0);
        t.complete(40.0);
        assert_eq!(t.current_or(0.0), 30.0);
        assert_eq!(t.completed(), 3);
    }
}
