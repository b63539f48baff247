//! Zero-mean two-point noise added to terminal rewards.

use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::{EnvState, Environment, Features, StepOutcome};
use crate::error::{Error, Result};
use crate::rng::StreamRng;

/// `value_hi` with probability `prob_hi`, otherwise `value_lo`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub value_hi: f64,
    pub prob_hi: f64,
    pub value_lo: f64,
}

impl Default for NoiseSpec {
    /// Right-skewed default: +4.5 w.p. 0.1, -0.5 otherwise.
    fn default() -> Self {
        Self {
            value_hi: 4.5,
            prob_hi: 0.1,
            value_lo: -0.5,
        }
    }
}

impl NoiseSpec {
    pub fn mean(&self) -> f64 {
        self.prob_hi * self.value_hi + (1.0 - self.prob_hi) * self.value_lo
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.value_hi.is_finite() && self.value_lo.is_finite() && self.prob_hi.is_finite())
        {
            return Err(Error::NonFinite("noise spec"));
        }
        if !(0.0..=1.0).contains(&self.prob_hi) {
            return Err(Error::Env(format!(
                "noise prob_hi {} outside [0, 1]",
                self.prob_hi
            )));
        }
        let scale = self.value_hi.abs().max(self.value_lo.abs()).max(1.0);
        if self.mean().abs() > 1e-12 * scale {
            return Err(Error::Env(format!(
                "noise must be zero-mean, got mean {}",
                self.mean()
            )));
        }
        Ok(())
    }

    pub fn is_identity(&self) -> bool {
        self.value_hi == 0.0 && self.value_lo == 0.0
    }

    pub fn sample(&self, rng: &mut dyn RngCore) -> f64 {
        if rng.gen_bool(self.prob_hi) {
            self.value_hi
        } else {
            self.value_lo
        }
    }
}

/// Wraps an environment and perturbs the reward of every terminating
/// transition. Noise draws come from a dedicated stream so the wrapped
/// dynamics see exactly the same random numbers as without the wrapper.
pub struct NoisyTerminal<E: ?Sized> {
    noise: NoiseSpec,
    rng: StreamRng,
    inner: Box<E>,
}

impl<E: Environment + ?Sized> NoisyTerminal<E> {
    pub fn new(inner: Box<E>, noise: NoiseSpec, rng: StreamRng) -> Result<Self> {
        noise.validate()?;
        Ok(Self { noise, rng, inner })
    }
}

impl<E: Environment + ?Sized> Environment for NoisyTerminal<E> {
    fn num_actions(&self) -> usize {
        self.inner.num_actions()
    }

    fn feature_dim(&self) -> usize {
        self.inner.feature_dim()
    }

    fn num_states(&self) -> Option<usize> {
        self.inner.num_states()
    }

    fn cutoff(&self) -> Option<usize> {
        self.inner.cutoff()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> EnvState {
        self.inner.reset(rng)
    }

    fn state(&self) -> &EnvState {
        self.inner.state()
    }

    fn step(&mut self, action: usize, rng: &mut dyn RngCore) -> Result<StepOutcome> {
        let mut out = self.inner.step(action, rng)?;
        if out.discount == 0.0 {
            out.reward += self.noise.sample(&mut self.rng);
        }
        Ok(out)
    }

    fn features(&self, state: &EnvState) -> Features {
        self.inner.features(state)
    }
}
