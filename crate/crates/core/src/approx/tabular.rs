use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense lookup table with `outputs` entries per state, zero-initialised.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TabularValues {
    pub states: usize,
    pub outputs: usize,
    pub table: Vec<f64>,
}

impl TabularValues {
    pub fn zeros(states: usize, outputs: usize) -> Self {
        Self {
            states,
            outputs,
            table: vec![0.0; states * outputs],
        }
    }

    fn key(&self, state: usize, k: usize) -> Result<usize> {
        if state >= self.states {
            return Err(Error::Dimension {
                expected: self.states,
                got: state + 1,
            });
        }
        if k >= self.outputs {
            return Err(Error::Dimension {
                expected: self.outputs,
                got: k + 1,
            });
        }
        Ok(state * self.outputs + k)
    }

    pub fn value(&self, state: usize, k: usize) -> Result<f64> {
        Ok(self.table[self.key(state, k)?])
    }

    pub fn row(&self, state: usize) -> Result<&[f64]> {
        let start = self.key(state, 0)?;
        Ok(&self.table[start..start + self.outputs])
    }

    /// Plain SGD step on one entry: `entry += α δ`.
    pub fn update(&mut self, state: usize, k: usize, delta: f64, alpha: f64) -> Result<()> {
        let i = self.key(state, k)?;
        self.table[i] += alpha * delta;
        Ok(())
    }

    /// `grad[state, k] += scale`, the indicator-feature gradient.
    pub fn accumulate_grad(&self, state: usize, k: usize, scale: f64, grad: &mut [f64]) -> Result<()> {
        let i = self.key(state, k)?;
        grad[i] += scale;
        Ok(())
    }
}

/// `table[key] += α δ`.
pub fn tabular_update(table: &mut TabularValues, state: usize, k: usize, delta: f64, alpha: f64) -> Result<()> {
    table.update(state, k, delta, alpha)
}
