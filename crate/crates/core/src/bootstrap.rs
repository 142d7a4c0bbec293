//! Wild-style bootstrap calibration of the change-point test.
//!
//! The estimated spot volatility path is truncated, smoothed with a moving
//! average, and floored; pseudo observations are then simulated from the
//! smoothed path with the estimated noise level, and the test statistic is
//! re-evaluated on each pseudo sample. The empirical quantile of the pseudo
//! statistics replaces the asymptotic critical value.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::TuningConfig;
use crate::error::{Result, VolJumpError};
use crate::series::ObservationSeries;
use crate::sim::derive_seed;
use crate::spectral::{
    estimate_spot_vol, estimate_spot_vol_with_weights, SpotVolSeries, PILOT_FLOOR,
};
use crate::testing::{
    max_rescaled_diff, run_test_on_spot, statistic_for_rule, TestReport, TestRule,
};

/// Bootstrap tuning knobs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    /// Number of pseudo samples.
    pub replications: usize,
    /// Moving-average length for the volatility smoothing (even, in bins).
    pub filter_len: usize,
    /// Master seed for the pseudo-sample RNG streams.
    pub seed: u64,
    /// Block shift of the pseudo statistic on the overlapping series: 1
    /// compares consecutive windows (the calibration default), `block_len`
    /// reproduces the original statistic's shift.
    pub pseudo_shift: usize,
    /// Re-run the full adaptive pipeline (pilot, weights, noise estimate) on
    /// each pseudo sample instead of reusing the original path's weights and
    /// noise level.
    #[serde(default)]
    pub reestimate_weights: bool,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self {
            replications: 500,
            filter_len: 30,
            seed: 0,
            pseudo_shift: 1,
            reestimate_weights: false,
        }
    }
}

impl BootstrapConfig {
    fn validate(&self, cfg: &TuningConfig) -> Result<()> {
        if self.replications == 0 {
            return Err(VolJumpError::parameter("replications must be >= 1"));
        }
        if self.filter_len < 2 || self.filter_len % 2 != 0 {
            return Err(VolJumpError::parameter("filter_len must be even and >= 2"));
        }
        if cfg.bins < self.filter_len + 1 {
            return Err(VolJumpError::parameter(format!(
                "need bins >= filter_len + 1 (bins = {}, filter_len = {})",
                cfg.bins, self.filter_len
            )));
        }
        if self.pseudo_shift == 0 || self.pseudo_shift > cfg.block_len {
            return Err(VolJumpError::parameter(
                "pseudo_shift must lie in 1..=block_len",
            ));
        }
        Ok(())
    }
}

/// Smoothed, floored squared-volatility path used to drive pseudo samples.
#[derive(Debug, Clone)]
pub struct SmoothedVolPath {
    /// Smoothed per-bin values `σ̃²_k`, `k = 1..=bins`.
    pub per_bin: Vec<f64>,
    /// How many bins hit the positivity floor.
    pub floored: usize,
}

impl SmoothedVolPath {
    /// Expands the per-bin path to the observation grid (`samples_per_bin`
    /// copies per bin), the increments' variance scale.
    pub fn per_sample(&self, samples_per_bin: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.per_bin.len() * samples_per_bin);
        for &v in &self.per_bin {
            out.extend(std::iter::repeat(v).take(samples_per_bin));
        }
        out
    }
}

// Symmetric moving average of even length `len`: weights 1/len on offsets
// |m| < len/2 and 1/(2 len) on the two endpoints, so affine sequences pass
// through unchanged. Boundary values are linearly interpolated between the
// raw endpoint and the first/last filtered value.
pub(crate) fn smooth_filter(b: &[f64], len: usize) -> Result<Vec<f64>> {
    let half = len / 2;
    let bins = b.len();
    if bins < len + 1 {
        return Err(VolJumpError::parameter(
            "series shorter than the smoothing filter",
        ));
    }
    let mut out = vec![0.0; bins];
    // interior: 0-based positions half..bins-half-1
    for i in half..bins - half {
        let mut acc = 0.5 * (b[i - half] + b[i + half]);
        for m in (i - half + 1)..(i + half) {
            acc += b[m];
        }
        out[i] = acc / len as f64;
    }
    let left_anchor = b[0];
    let left_inner = out[half];
    for i in 0..half {
        out[i] = left_anchor + (left_inner - left_anchor) * i as f64 / half as f64;
    }
    let right_anchor = b[bins - 1];
    let right_inner = out[bins - half - 1];
    for i in bins - half..bins {
        let t = (bins - 1 - i) as f64 / half as f64;
        out[i] = right_anchor + (right_inner - right_anchor) * t;
    }
    Ok(out)
}

/// Builds the smoothed volatility path from per-bin spot estimates:
/// truncation at `h^{τ-1}`, backward block means (shortened windows near the
/// start), the moving-average filter, and a positivity floor.
pub fn smooth_spot_path(
    per_bin: &[f64],
    cfg: &TuningConfig,
    bcfg: &BootstrapConfig,
) -> Result<SmoothedVolPath> {
    bcfg.validate(cfg)?;
    let bins = per_bin.len();
    if bins != cfg.bins {
        return Err(VolJumpError::parameter(format!(
            "per-bin series has {bins} entries, config expects {}",
            cfg.bins
        )));
    }
    let threshold = cfg.truncation_threshold();
    let tr: Vec<f64> = per_bin
        .iter()
        .map(|&v| if v.abs() <= threshold { v } else { 0.0 })
        .collect();
    let alpha = cfg.block_len;
    // backward means over up to alpha bins; divisor is the window size so
    // the first bins are means of what is available
    let blocks: Vec<f64> = (1..=bins)
        .map(|i| {
            let lo = i.saturating_sub(alpha);
            tr[lo..i].iter().sum::<f64>() / (i - lo) as f64
        })
        .collect();
    let smoothed = smooth_filter(&blocks, bcfg.filter_len)?;
    let mut floored = 0usize;
    let per_bin_out: Vec<f64> = smoothed
        .iter()
        .map(|&v| {
            if v < PILOT_FLOOR {
                floored += 1;
                PILOT_FLOOR
            } else {
                v
            }
        })
        .collect();
    if floored > 0 {
        log::warn!("smoothed volatility path floored in {floored} of {bins} bins");
    }
    Ok(SmoothedVolPath {
        per_bin: per_bin_out,
        floored,
    })
}

/// Simulates one pseudo observation series from a smoothed volatility path:
/// `X*_i = X*_{i-1} + √(σ̃²_i / n) Z_i`, `Y*_i = X*_i + η̂ E_i` with
/// independent standard normal `Z`, `E`, starting from `y0` without noise.
pub fn generate_pseudo_path(
    smoothed: &SmoothedVolPath,
    eta_hat: f64,
    y0: f64,
    n: usize,
    cfg: &TuningConfig,
    seed: u64,
) -> Result<ObservationSeries> {
    cfg.validate(n)?;
    let m = cfg.samples_per_bin(n);
    if smoothed.per_bin.len() != cfg.bins {
        return Err(VolJumpError::parameter(
            "smoothed path length does not match config bins",
        ));
    }
    if !(eta_hat >= 0.0) {
        return Err(VolJumpError::parameter("eta_hat must be nonnegative"));
    }
    let per_sample = smoothed.per_sample(m);
    let nf = n as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n + 1);
    let mut x = y0;
    values.push(y0);
    for &s2 in &per_sample {
        let z: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        x += (s2 / nf).sqrt() * z;
        let e: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
        values.push(x + eta_hat * e);
    }
    ObservationSeries::new(values)
}

/// Outcome of a bootstrap-calibrated test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BootstrapReport {
    /// The asymptotic-rule report on the original data (statistic, p-value
    /// against the Gumbel limit, asymptotic decision).
    pub asymptotic: TestReport,
    /// Bootstrap critical value: the `⌈(1-α)N⌉`-th order statistic of the
    /// pseudo statistics.
    pub quantile: f64,
    /// Bootstrap decision: original statistic at or above the quantile.
    pub reject: bool,
    /// Fraction of pseudo statistics at or above the original statistic.
    pub p_value: f64,
    pub replications: usize,
    /// Pseudo samples whose statistic was degenerate (infinite).
    pub degenerate_replications: usize,
}

fn pseudo_statistic(
    spot: &SpotVolSeries,
    rule: &TestRule,
    eta_stat: f64,
    shift: usize,
    cfg: &TuningConfig,
) -> Result<(f64, bool)> {
    if rule.kind.is_overlap() && shift != cfg.block_len {
        let blocks = if rule.kind.is_truncated() {
            &spot.blocks.trunc
        } else {
            &spot.blocks.overlap
        };
        if blocks.len() <= shift {
            return Err(VolJumpError::parameter(
                "overlapping series too short for the pseudo shift",
            ));
        }
        let (v, _, deg) = max_rescaled_diff(blocks, eta_stat, shift, cfg.block_len);
        Ok((v, deg))
    } else {
        let (v, _, deg) = statistic_for_rule(spot, rule.kind, eta_stat, cfg)?;
        Ok((v, deg))
    }
}

/// Runs the bootstrap-calibrated test: estimates the spot volatility once,
/// builds the smoothed path, simulates `replications` pseudo samples in
/// parallel (deterministic per-replication seeds), and compares the original
/// statistic against the empirical quantile of the pseudo statistics.
pub fn bootstrap_test(
    obs: &ObservationSeries,
    rule: &TestRule,
    cfg: &TuningConfig,
    bcfg: &BootstrapConfig,
) -> Result<BootstrapReport> {
    bcfg.validate(cfg)?;
    let n = obs.n();
    let spot = estimate_spot_vol(obs, cfg)?;
    let asymptotic = run_test_on_spot(&spot, rule, cfg)?;
    let smoothed = smooth_spot_path(&spot.per_bin, cfg, bcfg)?;
    let eta_hat = spot.noise_var_hat.sqrt();
    let y0 = obs.values()[0];

    let stats: Vec<(f64, bool)> = (0..bcfg.replications)
        .into_par_iter()
        .map(|rep| {
            let seed = derive_seed(bcfg.seed, rep as u64);
            let pseudo = generate_pseudo_path(&smoothed, eta_hat, y0, n, cfg, seed)?;
            let (pseudo_spot, eta_stat) = if bcfg.reestimate_weights {
                let s = estimate_spot_vol(&pseudo, cfg)?;
                let e = s.noise_var_hat.sqrt();
                (s, e)
            } else {
                let s = estimate_spot_vol_with_weights(
                    &pseudo,
                    cfg,
                    &spot,
                    spot.noise_var_hat,
                    spot.noise_var_used,
                )?;
                (s, eta_hat)
            };
            pseudo_statistic(&pseudo_spot, rule, eta_stat, bcfg.pseudo_shift, cfg)
        })
        .collect::<Result<Vec<_>>>()?;

    let degenerate_replications = stats.iter().filter(|s| s.1).count();
    if degenerate_replications > 0 {
        log::warn!(
            "{degenerate_replications} of {} pseudo statistics were degenerate",
            bcfg.replications
        );
    }
    let mut sorted: Vec<f64> = stats.iter().map(|s| s.0).collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let nrep = sorted.len();
    let idx = ((1.0 - rule.level) * nrep as f64).ceil() as usize;
    let quantile = sorted[idx.clamp(1, nrep) - 1];
    let above = sorted
        .iter()
        .filter(|&&v| v >= asymptotic.statistic)
        .count();
    Ok(BootstrapReport {
        reject: asymptotic.statistic >= quantile,
        p_value: above as f64 / nrep as f64,
        quantile,
        replications: nrep,
        degenerate_replications,
        asymptotic,
    })
}
