//! Two-hidden-layer ReLU network with a linear output layer and exact
//! backpropagation.
//!
//! Parameters are one flat vector in layer order:
//! `W1 (h1 x in), b1, W2 (h2 x h1), b2, W3 (out x h2), b3`, weights row-major.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::Features;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    /// `[in, h1, h2, out]`.
    pub sizes: [usize; 4],
    pub params: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
    end: usize,
}

impl Layout {
    fn of(sizes: [usize; 4]) -> Self {
        let [i, h1, h2, o] = sizes;
        let w1 = 0;
        let b1 = w1 + h1 * i;
        let w2 = b1 + h1;
        let b2 = w2 + h2 * h1;
        let w3 = b2 + h2;
        let b3 = w3 + o * h2;
        let end = b3 + o;
        Self {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
            end,
        }
    }
}

/// Intermediate activations kept for backprop.
#[derive(Clone, Debug, Default)]
pub struct Activations {
    pub z1: Vec<f64>,
    pub a1: Vec<f64>,
    pub z2: Vec<f64>,
    pub a2: Vec<f64>,
    pub out: Vec<f64>,
}

fn relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

/// ReLU derivative with the subgradient at 0 taken as 0.
fn relu_grad(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl MlpModel {
    pub fn parameter_count(sizes: [usize; 4]) -> usize {
        Layout::of(sizes).end
    }

    pub fn zeros(sizes: [usize; 4]) -> Self {
        Self {
            sizes,
            params: vec![0.0; Self::parameter_count(sizes)],
        }
    }

    /// Glorot-uniform weights `U(±sqrt(6 / (fan_in + fan_out)))`, zero biases.
    pub fn glorot<R: Rng + ?Sized>(sizes: [usize; 4], rng: &mut R) -> Self {
        let mut m = Self::zeros(sizes);
        let l = Layout::of(sizes);
        let [i, h1, h2, o] = sizes;
        for (start, fan_in, fan_out) in [(l.w1, i, h1), (l.w2, h1, h2), (l.w3, h2, o)] {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for w in &mut m.params[start..start + fan_in * fan_out] {
                *w = rng.gen_range(-limit..limit);
            }
        }
        m
    }

    pub fn from_params(sizes: [usize; 4], params: Vec<f64>) -> Result<Self> {
        let expected = Self::parameter_count(sizes);
        if params.len() != expected {
            return Err(Error::Dimension {
                expected,
                got: params.len(),
            });
        }
        Ok(Self { sizes, params })
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[3]
    }

    fn check_input(&self, x: &Features) -> Result<()> {
        let n = self.sizes[0];
        match x {
            Features::Index(i) if *i < n => Ok(()),
            Features::Index(i) => Err(Error::Dimension {
                expected: n,
                got: i + 1,
            }),
            Features::Dense(v) if v.len() == n => Ok(()),
            Features::Dense(v) => Err(Error::Dimension {
                expected: n,
                got: v.len(),
            }),
        }
    }

    pub fn forward_cached(&self, x: &Features) -> Result<Activations> {
        self.check_input(x)?;
        let l = Layout::of(self.sizes);
        let [n_in, h1, h2, n_out] = self.sizes;
        let p = &self.params;

        let mut z1 = p[l.b1..l.b1 + h1].to_vec();
        match x {
            Features::Index(k) => {
                for (j, z) in z1.iter_mut().enumerate() {
                    *z += p[l.w1 + j * n_in + k];
                }
            }
            Features::Dense(v) => {
                for (j, z) in z1.iter_mut().enumerate() {
                    let row = &p[l.w1 + j * n_in..l.w1 + (j + 1) * n_in];
                    *z += row.iter().zip(v).map(|(w, xi)| w * xi).sum::<f64>();
                }
            }
        }
        let a1: Vec<f64> = z1.iter().map(|&z| relu(z)).collect();

        let mut z2 = p[l.b2..l.b2 + h2].to_vec();
        for (j, z) in z2.iter_mut().enumerate() {
            let row = &p[l.w2 + j * h1..l.w2 + (j + 1) * h1];
            *z += row.iter().zip(&a1).map(|(w, a)| w * a).sum::<f64>();
        }
        let a2: Vec<f64> = z2.iter().map(|&z| relu(z)).collect();

        let mut out = p[l.b3..l.b3 + n_out].to_vec();
        for (k, o) in out.iter_mut().enumerate() {
            let row = &p[l.w3 + k * h2..l.w3 + (k + 1) * h2];
            *o += row.iter().zip(&a2).map(|(w, a)| w * a).sum::<f64>();
        }
        Ok(Activations {
            z1,
            a1,
            z2,
            a2,
            out,
        })
    }

    pub fn forward(&self, x: &Features) -> Result<Vec<f64>> {
        Ok(self.forward_cached(x)?.out)
    }

    /// `grad += scale * d out_k / d params`, reusing a forward pass.
    pub fn accumulate_grad_cached(
        &self,
        x: &Features,
        acts: &Activations,
        k: usize,
        scale: f64,
        grad: &mut [f64],
    ) -> Result<()> {
        let l = Layout::of(self.sizes);
        let [n_in, h1, h2, n_out] = self.sizes;
        if k >= n_out {
            return Err(Error::Dimension {
                expected: n_out,
                got: k + 1,
            });
        }
        if grad.len() != l.end {
            return Err(Error::Dimension {
                expected: l.end,
                got: grad.len(),
            });
        }
        let p = &self.params;

        grad[l.b3 + k] += scale;
        let w3_row = &p[l.w3 + k * h2..l.w3 + (k + 1) * h2];
        let g3 = &mut grad[l.w3 + k * h2..l.w3 + (k + 1) * h2];
        for (g, a) in g3.iter_mut().zip(&acts.a2) {
            *g += scale * a;
        }

        let dz2: Vec<f64> = w3_row
            .iter()
            .zip(&acts.z2)
            .map(|(w, &z)| scale * w * relu_grad(z))
            .collect();

        let mut da1 = vec![0.0; h1];
        for (j, &d) in dz2.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            grad[l.b2 + j] += d;
            let g2 = &mut grad[l.w2 + j * h1..l.w2 + (j + 1) * h1];
            for (g, a) in g2.iter_mut().zip(&acts.a1) {
                *g += d * a;
            }
            let w2_row = &p[l.w2 + j * h1..l.w2 + (j + 1) * h1];
            for (acc, w) in da1.iter_mut().zip(w2_row) {
                *acc += d * w;
            }
        }

        for (j, (&d, &z)) in da1.iter().zip(&acts.z1).enumerate() {
            let dz1 = d * relu_grad(z);
            if dz1 == 0.0 {
                continue;
            }
            grad[l.b1 + j] += dz1;
            match x {
                Features::Index(i) => grad[l.w1 + j * n_in + i] += dz1,
                Features::Dense(v) => {
                    let g1 = &mut grad[l.w1 + j * n_in..l.w1 + (j + 1) * n_in];
                    for (g, xi) in g1.iter_mut().zip(v) {
                        *g += dz1 * xi;
                    }
                }
            }
        }
        Ok(())
    }

    /// `d out_k / d params` at `x`, shaped like the parameter vector.
    pub fn grad_scalar_output(&self, x: &Features, k: usize) -> Result<Vec<f64>> {
        let acts = self.forward_cached(x)?;
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_grad_cached(x, &acts, k, 1.0, &mut grad)?;
        Ok(grad)
    }

    /// Flat little-endian checkpoint: four `u64` layer sizes, then the
    /// parameters as `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + 8 * self.params.len());
        for s in self.sizes {
            out.extend_from_slice(&(s as u64).to_le_bytes());
        }
        for p in &self.params {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 32 || !(bytes.len() - 32).is_multiple_of(8) {
            return Err(Error::Dimension {
                expected: 32,
                got: bytes.len(),
            });
        }
        let word = |i: usize| -> [u8; 8] { bytes[i * 8..i * 8 + 8].try_into().expect("8 bytes") };
        let mut sizes = [0usize; 4];
        for (i, s) in sizes.iter_mut().enumerate() {
            *s = u64::from_le_bytes(word(i)) as usize;
        }
        let params = (4..bytes.len() / 8)
            .map(|i| f64::from_le_bytes(word(i)))
            .collect();
        Self::from_params(sizes, params)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }
}
