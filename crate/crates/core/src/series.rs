use serde::{Deserialize, Serialize};

use crate::error::{Result, VolJumpError};

/// Noisy log-price observations `Y_{i/n}, i = 0..n` on the unit time interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationSeries {
    values: Vec<f64>,
}

impl ObservationSeries {
    /// Wraps a vector of `n + 1` samples. All values must be finite and there
    /// must be at least one increment.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.len() < 2 {
            return Err(VolJumpError::parameter(
                "observation series needs at least 2 samples",
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(VolJumpError::format(format!(
                "non-finite observation at index {pos}"
            )));
        }
        Ok(Self { values })
    }

    /// Number of increments `n` (the series holds `n + 1` samples).
    pub fn n(&self) -> usize {
        self.values.len() - 1
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Increment `Δ_i Y = Y_{i/n} - Y_{(i-1)/n}` for `i = 1..=n`.
    pub fn increment(&self, i: usize) -> f64 {
        self.values[i] - self.values[i - 1]
    }

    pub fn increments(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.windows(2).map(|w| w[1] - w[0])
    }
}
