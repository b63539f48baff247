//! Value-function representations with analytic gradients, plus Adam.

pub mod adam;
pub mod mlp;
pub mod tabular;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Features;
use crate::error::{Error, Result};

pub use adam::AdamState;
pub use mlp::{Activations, MlpModel};
pub use tabular::{tabular_update, TabularValues};

/// Either a lookup table keyed by state index or an MLP over features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Approximator {
    Tabular(TabularValues),
    Mlp(MlpModel),
}

/// A forward pass kept around so the gradient can reuse it.
#[derive(Clone, Debug)]
pub struct Forward {
    pub out: Vec<f64>,
    acts: Option<Activations>,
}

fn table_index(x: &Features) -> Result<usize> {
    x.index()
        .ok_or(Error::Dimension { expected: 1, got: 0 })
}

impl Approximator {
    pub fn tabular(states: usize, outputs: usize) -> Self {
        Self::Tabular(TabularValues::zeros(states, outputs))
    }

    pub fn mlp<R: Rng + ?Sized>(input: usize, hidden: usize, outputs: usize, rng: &mut R) -> Self {
        Self::Mlp(MlpModel::glorot([input, hidden, hidden, outputs], rng))
    }

    pub fn outputs(&self) -> usize {
        match self {
            Self::Tabular(t) => t.outputs,
            Self::Mlp(m) => m.output_dim(),
        }
    }

    pub fn params(&self) -> &[f64] {
        match self {
            Self::Tabular(t) => &t.table,
            Self::Mlp(m) => &m.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        match self {
            Self::Tabular(t) => &mut t.table,
            Self::Mlp(m) => &mut m.params,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|p| p.is_finite())
    }

    pub fn forward_cached(&self, x: &Features) -> Result<Forward> {
        match self {
            Self::Tabular(t) => Ok(Forward {
                out: t.row(table_index(x)?)?.to_vec(),
                acts: None,
            }),
            Self::Mlp(m) => {
                let acts = m.forward_cached(x)?;
                Ok(Forward {
                    out: acts.out.clone(),
                    acts: Some(acts),
                })
            }
        }
    }

    pub fn forward(&self, x: &Features) -> Result<Vec<f64>> {
        match self {
            Self::Tabular(t) => Ok(t.row(table_index(x)?)?.to_vec()),
            Self::Mlp(m) => m.forward(x),
        }
    }

    pub fn value(&self, x: &Features, k: usize) -> Result<f64> {
        match self {
            Self::Tabular(t) => t.value(table_index(x)?, k),
            Self::Mlp(m) => m
                .forward(x)?
                .get(k)
                .copied()
                .ok_or(Error::Dimension {
                    expected: m.output_dim(),
                    got: k + 1,
                }),
        }
    }

    pub fn max_value(&self, x: &Features) -> Result<f64> {
        Ok(self
            .forward(x)?
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max))
    }

    /// `grad += scale * d out_k / d params` at `x`.
    pub fn accumulate_grad(
        &self,
        x: &Features,
        fwd: &Forward,
        k: usize,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        match self {
            Self::Tabular(t) => t.accumulate_grad(table_index(x)?, k, scale, grad),
            Self::Mlp(m) => {
                let acts = fwd.acts.as_ref().ok_or(Error::NonFinite("missing activations"))?;
                m.accumulate_grad_cached(x, acts, k, scale, grad)
            }
        }
    }
}

/// Which update rule a learner applies to its accumulated gradient.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    #[default]
    Adam,
    Sgd,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n: usize, eps: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Self::Adam(AdamState::with_hyper(
                n,
                adam::DEFAULT_BETA1,
                adam::DEFAULT_BETA2,
                eps,
            )),
            OptimizerKind::Sgd => Self::Sgd,
        }
    }

    /// Descends along `grad`.
    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) -> Result<()> {
        match self {
            Self::Adam(a) => a.step(params, grad, lr),
            Self::Sgd => {
                if grad.len() != params.len() {
                    return Err(Error::Dimension {
                        expected: params.len(),
                        got: grad.len(),
                    });
                }
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFinite("gradient"));
                }
                for (p, g) in params.iter_mut().zip(grad) {
                    *p -= lr * g;
                }
                Ok(())
            }
        }
    }
}

/// Sums per-sample gradients pairwise in place and returns the total in
/// `grads[0]`. Identical inputs of power-of-two count sum without rounding.
pub fn pairwise_sum(grads: &mut [Vec<f64>]) -> &[f64] {
    let mut n = grads.len();
    assert!(n > 0, "pairwise_sum of nothing");
    while n > 1 {
        let half = n / 2;
        for i in 0..half {
            let (lo, hi) = grads.split_at_mut(2 * i + 1);
            let (dst, src) = (&mut lo[2 * i], &hi[0]);
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
            if i != 0 {
                grads.swap(i, 2 * i);
            }
        }
        if n % 2 == 1 {
            grads.swap(half, n - 1);
            n = half + 1;
        } else {
            n = half;
        }
    }
    &grads[0]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairwise_sum_adds_everything() {
        for n in 1..12 {
            let mut g: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, 1.0]).collect();
            let s = pairwise_sum(&mut g).to_vec();
            assert_eq!(s, vec![(n * (n - 1) / 2) as f64, n as f64]);
        }
    }

    #[test]
    fn pairwise_sum_of_copies_is_exact_for_powers_of_two() {
        let x = 0.1f64 + 0.2;
        for n in [1usize, 2, 4, 8, 64] {
            let mut g = vec![vec![x]; n];
            assert_eq!(pairwise_sum(&mut g)[0] / n as f64, x);
        }
    }

    #[test]
    fn tabular_rejects_dense_features() {
        let a = Approximator::tabular(3, 1);
        assert!(a.forward(&Features::Dense(vec![0.0])).is_err());
        assert_eq!(a.forward(&Features::Index(2)).unwrap(), vec![0.0]);
    }

    #[test]
    fn sgd_descends() {
        let mut p = vec![1.0, 1.0];
        Optimizer::Sgd.step(&mut p, &[1.0, -2.0], 0.5).unwrap();
        assert_eq!(p, vec![0.5, 2.0]);
    }
}
