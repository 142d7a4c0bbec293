use serde::{Deserialize, Serialize};

use crate::error::{Result, VolJumpError};

/// Tuning parameters for the spectral spot volatility estimators and the
/// change-point statistics.
///
/// `bins` is the number of estimation bins `h^{-1}` on the unit interval,
/// `block_len` the number of bins per big block. Defaults follow the
/// simulation configuration: 120 bins, blocks of 15 bins, truncation
/// exponent 3/4, pilot over 20 frequencies, spectral cutoff 50.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuningConfig {
    /// Number of bins `h^{-1}`.
    pub bins: usize,
    /// Bins per big block (`α_n`).
    pub block_len: usize,
    /// Truncation exponent `τ ∈ (0, 1)`; spot estimates exceeding
    /// `h^{τ-1}` in absolute value are discarded.
    pub tau: f64,
    /// Regularity exponent of the volatility path under the null, in (0, 1].
    /// Only used for a plausibility warning on `block_len`.
    pub regularity: f64,
    /// Number of Fourier frequencies in the pilot estimator.
    pub pilot_freqs: usize,
    /// Spectral cutoff: frequencies `j > cutoff` are dropped from the
    /// adaptive estimator and the kept weights renormalized.
    pub cutoff: usize,
    /// Known noise variance `η²`. When set it is used in the oracle weights
    /// and bias corrections; when `None` it is estimated from the data.
    pub noise_variance: Option<f64>,
    /// When a known `noise_variance` is set, also use it (instead of the
    /// estimate) in the statistic's denominator. Off by default: the
    /// statistic as defined always uses the estimated noise level.
    #[serde(default)]
    pub use_known_eta_in_stat: bool,
}

impl Default for TuningConfig {
    fn default() -> Self {
        Self {
            bins: 120,
            block_len: 15,
            tau: 0.75,
            regularity: 0.5,
            pilot_freqs: 20,
            cutoff: 50,
            noise_variance: None,
            use_known_eta_in_stat: false,
        }
    }
}

impl TuningConfig {
    /// Bin width `h`.
    pub fn bin_width(&self) -> f64 {
        1.0 / self.bins as f64
    }

    /// Samples per bin, `n h`. Only valid for an `n` accepted by [`Self::validate`].
    pub fn samples_per_bin(&self, n: usize) -> usize {
        n / self.bins
    }

    /// Number of non-overlapping big blocks, `m_n = ⌊(α_n h)^{-1}⌋`.
    pub fn num_blocks(&self) -> usize {
        self.bins / self.block_len
    }

    /// Truncation threshold `h^{τ-1}`.
    pub fn truncation_threshold(&self) -> f64 {
        self.bin_width().powf(self.tau - 1.0)
    }

    /// Checks the config against a sample size `n`. Bin edges must align with
    /// sample points, so `n` must be a multiple of `bins`.
    pub fn validate(&self, n: usize) -> Result<()> {
        if self.bins == 0 || self.block_len == 0 || self.pilot_freqs == 0 || self.cutoff == 0 {
            return Err(VolJumpError::parameter(
                "bins, block_len, pilot_freqs and cutoff must be positive",
            ));
        }
        if n % self.bins != 0 {
            return Err(VolJumpError::parameter(format!(
                "n = {n} is not a multiple of bins = {}; bin edges must align with sample points",
                self.bins
            )));
        }
        if n / self.bins < 2 {
            return Err(VolJumpError::parameter(
                "need at least 2 samples per bin",
            ));
        }
        if self.block_len > self.bins {
            return Err(VolJumpError::parameter(format!(
                "block_len = {} exceeds bins = {}",
                self.block_len, self.bins
            )));
        }
        let max_freq = n / self.bins - 1;
        if self.cutoff > max_freq {
            return Err(VolJumpError::parameter(format!(
                "cutoff = {} exceeds ⌊n h⌋ - 1 = {max_freq}",
                self.cutoff
            )));
        }
        if self.pilot_freqs > self.cutoff {
            return Err(VolJumpError::parameter(format!(
                "pilot_freqs = {} exceeds cutoff = {}",
                self.pilot_freqs, self.cutoff
            )));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(VolJumpError::parameter("tau must lie in (0, 1)"));
        }
        if !(self.regularity > 0.0 && self.regularity <= 1.0) {
            return Err(VolJumpError::parameter("regularity must lie in (0, 1]"));
        }
        if let Some(v) = self.noise_variance {
            if !(v.is_finite() && v >= 0.0) {
                return Err(VolJumpError::parameter(
                    "noise_variance must be finite and nonnegative",
                ));
            }
        }
        // Finite-n proxy for the block-length growth condition: warn, don't fail.
        let block_span = self.block_len as f64 * self.bin_width();
        let proxy = (self.block_len as f64).sqrt()
            * block_span.powf(self.regularity)
            * (n as f64).ln().sqrt();
        if proxy > 1.0 {
            log::warn!(
                "block_len = {} may be too large for regularity {} at n = {n} \
                 (growth proxy {proxy:.3} > 1)",
                self.block_len,
                self.regularity
            );
        }
        Ok(())
    }

    /// Picks the number of bins for a given `n` when the caller has no
    /// preference: the divisor of `n` closest to `√n / log n`.
    ///
    /// The simulation setup overrides this with 120 bins for n = 30,000.
    pub fn suggest_bins(n: usize) -> usize {
        let target = (n as f64).sqrt() / (n as f64).ln();
        let mut best = 1usize;
        let mut best_dist = f64::INFINITY;
        let mut d = 1usize;
        while d * d <= n {
            if n % d == 0 {
                for cand in [d, n / d] {
                    // need at least 2 samples per bin
                    if n / cand >= 2 {
                        let dist = (cand as f64 - target).abs();
                        if dist < best_dist {
                            best_dist = dist;
                            best = cand;
                        }
                    }
                }
            }
            d += 1;
        }
        best
    }
}
