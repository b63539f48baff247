//! FIFO replay memory with uniform, proportional and DM-style prioritized
//! sampling, with or without replacement.

mod buffer;
mod dump;
pub mod sum_tree;

use serde::{Deserialize, Serialize};

use crate::env::Features;

pub use buffer::{PrioritizedBuffer, SampledBatch};
pub use dump::{read_jsonl, DumpRecord};
pub use sum_tree::SumTree;

/// Smallest priority ever stored.
pub const PRIORITY_FLOOR: f64 = 1e-9;

/// One experience tuple `(s, a, r, s', γ')`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub s: Features,
    pub a: usize,
    pub r: f64,
    pub s_next: Features,
    pub discount: f64,
}

/// Extra knobs of DM-PER: priority exponent, annealed importance-sampling
/// exponent and a uniform mix-in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DmPerParams {
    #[serde(default = "DmPerParams::default_priority_exponent")]
    pub priority_exponent: f64,
    #[serde(default = "DmPerParams::default_is_start")]
    pub is_exponent_start: f64,
    #[serde(default = "DmPerParams::default_is_end")]
    pub is_exponent_end: f64,
    #[serde(default = "DmPerParams::default_mixin")]
    pub mixin: f64,
    #[serde(default)]
    pub is_normalization: IsNormalization,
}

impl Default for DmPerParams {
    fn default() -> Self {
        Self {
            priority_exponent: Self::default_priority_exponent(),
            is_exponent_start: Self::default_is_start(),
            is_exponent_end: Self::default_is_end(),
            mixin: Self::default_mixin(),
            is_normalization: IsNormalization::default(),
        }
    }
}

impl DmPerParams {
    fn default_priority_exponent() -> f64 {
        0.6
    }
    fn default_is_start() -> f64 {
        0.4
    }
    fn default_is_end() -> f64 {
        1.0
    }
    fn default_mixin() -> f64 {
        1e-3
    }

    /// Importance-sampling exponent at step `t` of `horizon`, linear from
    /// start to end and held at the end value afterwards.
    pub fn beta(&self, t: u64, horizon: u64) -> f64 {
        if horizon == 0 {
            return self.is_exponent_end;
        }
        let frac = (t as f64 / horizon as f64).min(1.0);
        self.is_exponent_start + (self.is_exponent_end - self.is_exponent_start) * frac
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.priority_exponent >= 0.0 && self.priority_exponent.is_finite()) {
            return Err("priority_exponent must be finite and >= 0".into());
        }
        if !(0.0..=1.0).contains(&self.mixin) {
            return Err("mixin must lie in [0, 1]".into());
        }
        for (name, b) in [
            ("is_exponent_start", self.is_exponent_start),
            ("is_exponent_end", self.is_exponent_end),
        ] {
            if !(0.0..=1.0).contains(&b) {
                return Err(format!("{name} must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}

/// How DM-PER importance weights are normalised.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsNormalization {
    /// Divide by the largest weight in the batch.
    #[default]
    BatchMax,
    /// Divide by the largest weight any stored item could receive.
    BufferMax,
    /// Raw `(N P(i))^-β`.
    None,
}

/// Sampling distribution for one batch draw.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Regime {
    /// Every stored item equally likely; priorities ignored.
    Uniform,
    /// `P(i) = p_i / Σ p`.
    Proportional,
    /// `P(i) = (1 - η) p_i^α / Σ p^α + η / N` with importance weights
    /// `(N P(i))^-β(t)`.
    DmPer {
        params: DmPerParams,
        step: u64,
        horizon: u64,
    },
}
