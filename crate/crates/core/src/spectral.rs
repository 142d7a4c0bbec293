//! Spectral spot volatility estimation under additive microstructure noise.
//!
//! The unit interval is split into `bins` bins of width `h`. On each bin a
//! local Fourier method of moments combines bias-corrected squared spectral
//! statistics with variance-minimizing weights into a spot volatility
//! estimate. Big blocks of `block_len` consecutive bins are then averaged
//! into the block series the change-point statistics are built from.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex, OnceLock};

use crate::config::TuningConfig;
use crate::error::{Result, VolJumpError};
use crate::series::ObservationSeries;

/// Floor applied to pilot estimates before they enter the oracle weights,
/// which require a strictly positive volatility.
pub const PILOT_FLOOR: f64 = 1e-8;

/// Localized sine basis `Φ_jk(t) = √(2/h)·sin(jπ(t-(k-1)h)/h)` on bin `k`,
/// zero outside.
pub fn sine_basis(j: usize, k: usize, t: f64, n: usize, cfg: &TuningConfig) -> Result<f64> {
    check_jk(j, k, n, cfg)?;
    let h = cfg.bin_width();
    let s = t - (k - 1) as f64 * h;
    if s < 0.0 || s > h {
        return Ok(0.0);
    }
    Ok((2.0 / h).sqrt() * (j as f64 * PI * s / h).sin())
}

/// Companion basis `φ_jk(t) = 2n√(2/h)·sin(jπ/(2nh))·cos(jπ(t-(k-1)h)/h)` on
/// bin `k`, zero outside. Its empirical norm is the noise bias-correction
/// factor in the spot estimator.
pub fn phi_basis(j: usize, k: usize, t: f64, n: usize, cfg: &TuningConfig) -> Result<f64> {
    check_jk(j, k, n, cfg)?;
    let h = cfg.bin_width();
    let s = t - (k - 1) as f64 * h;
    if s < 0.0 || s > h {
        return Ok(0.0);
    }
    let m = (n as f64 * h).floor();
    Ok(2.0 * n as f64
        * (2.0 / h).sqrt()
        * (j as f64 * PI / (2.0 * m)).sin()
        * (j as f64 * PI * s / h).cos())
}

fn check_jk(j: usize, k: usize, n: usize, cfg: &TuningConfig) -> Result<()> {
    let max_j = n / cfg.bins - 1;
    if j == 0 || j > max_j {
        return Err(VolJumpError::parameter(format!(
            "frequency j = {j} outside 1..={max_j}"
        )));
    }
    if k == 0 || k > cfg.bins {
        return Err(VolJumpError::parameter(format!(
            "bin k = {k} outside 1..={}",
            cfg.bins
        )));
    }
    Ok(())
}

/// Midpoint-grid scalar product `[f,g]_n = (1/n) Σ f((i-½)/n) g((i-½)/n)`.
pub fn empirical_scalar_product(
    f: impl Fn(f64) -> f64,
    g: impl Fn(f64) -> f64,
    n: usize,
) -> f64 {
    let nf = n as f64;
    (1..=n)
        .map(|i| {
            let t = (i as f64 - 0.5) / nf;
            f(t) * g(t)
        })
        .sum::<f64>()
        / nf
}

/// Spectral statistic `S_jk(Y) = Σ_i Δ_i Y · Φ_jk(i/n)`. Only increments with
/// `i/n` inside bin `k` contribute.
pub fn spectral_statistic(
    obs: &ObservationSeries,
    j: usize,
    k: usize,
    cfg: &TuningConfig,
) -> Result<f64> {
    let n = obs.n();
    check_jk(j, k, n, cfg)?;
    cfg.validate(n)?;
    let m = cfg.samples_per_bin(n);
    let scale = (2.0 * cfg.bins as f64).sqrt();
    let start = (k - 1) * m;
    // Φ_jk vanishes at both bin edges, so only interior sample points matter.
    let mut acc = 0.0;
    for offset in 1..m {
        let i = start + offset;
        acc += obs.increment(i) * (j as f64 * PI * offset as f64 / m as f64).sin();
    }
    Ok(scale * acc)
}

/// Noise variance estimator `η̂² = (1/2n) Σ (Y_{i/n} - Y_{(i-1)/n})²`.
pub fn noise_variance_hat(obs: &ObservationSeries) -> f64 {
    let n = obs.n() as f64;
    obs.increments().map(|d| d * d).sum::<f64>() / (2.0 * n)
}

// Cached per-(n, bins) quantities: the empirical norms `[φ_jk, φ_jk]_n`
// (bin-shift invariant on an aligned grid) and a sine table for the spectral
// statistics.
pub(crate) struct SpectralTables {
    /// `[φ_j, φ_j]_n` for j = 1..=M-1, with M = n h.
    pub phi_norms: Vec<f64>,
    /// `sin(jπm/M)` for j, m = 1..=M-1, row-major in j.
    pub sine: Vec<f64>,
}

impl SpectralTables {
    fn build(n: usize, bins: usize) -> Self {
        let m = n / bins;
        let mf = m as f64;
        let nf = n as f64;
        let h = 1.0 / bins as f64;
        let mut phi_norms = Vec::with_capacity(m - 1);
        for j in 1..m {
            // direct midpoint summation over the first bin's sample points
            let amp = 2.0 * nf * (2.0 / h).sqrt() * (j as f64 * PI / (2.0 * mf)).sin();
            let mut acc = 0.0;
            for i in 1..=m {
                let c = (j as f64 * PI * (i as f64 - 0.5) / mf).cos();
                acc += c * c;
            }
            phi_norms.push(amp * amp * acc / nf);
        }
        let mut sine = Vec::with_capacity((m - 1) * (m - 1));
        for j in 1..m {
            for mm in 1..m {
                sine.push((j as f64 * PI * mm as f64 / mf).sin());
            }
        }
        Self { phi_norms, sine }
    }

    pub fn phi_norm(&self, j: usize) -> f64 {
        self.phi_norms[j - 1]
    }
}

static TABLE_CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<SpectralTables>>>> =
    OnceLock::new();

pub(crate) fn tables(n: usize, bins: usize) -> Arc<SpectralTables> {
    let cache = TABLE_CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry((n, bins))
        .or_insert_with(|| Arc::new(SpectralTables::build(n, bins)))
        .clone()
}

/// Empirical norm `[φ_jk, φ_jk]_n`, computed once per `(j, n, bins)` and cached.
pub fn phi_norm(j: usize, n: usize, cfg: &TuningConfig) -> Result<f64> {
    check_jk(j, 1, n, cfg)?;
    Ok(tables(n, cfg.bins).phi_norm(j))
}

/// Pilot spot volatility estimate for bin `k`: bias-corrected squared
/// spectral statistics averaged over `pilot_freqs` frequencies and the
/// `block_len` preceding bins (the first `block_len` bins for small `k`).
/// May be negative; callers clamp before deriving weights.
pub fn pilot_spot_vol(
    obs: &ObservationSeries,
    k: usize,
    cfg: &TuningConfig,
    eta_hat_sq: f64,
) -> Result<f64> {
    let n = obs.n();
    cfg.validate(n)?;
    check_jk(1, k, n, cfg)?;
    let stats = compute_spectral_table(obs, cfg, cfg.pilot_freqs);
    let tabs = tables(n, cfg.bins);
    Ok(pilot_from_table(&stats, &tabs, k, cfg, eta_hat_sq, n))
}

fn pilot_window(k: usize, block_len: usize) -> std::ops::RangeInclusive<usize> {
    if k > block_len {
        (k - block_len)..=(k - 1)
    } else {
        1..=block_len
    }
}

fn pilot_from_table(
    stats: &[Vec<f64>],
    tabs: &SpectralTables,
    k: usize,
    cfg: &TuningConfig,
    eta_sq: f64,
    n: usize,
) -> f64 {
    let jmax = cfg.pilot_freqs;
    let mut acc = 0.0;
    for l in pilot_window(k, cfg.block_len) {
        for j in 1..=jmax {
            let s = stats[l - 1][j - 1];
            acc += s * s - tabs.phi_norm(j) * eta_sq / n as f64;
        }
    }
    acc / (cfg.block_len as f64 * jmax as f64)
}

/// Variance-minimizing oracle weights over the full frequency range
/// `1..=⌊nh⌋-1`: `w_j ∝ (σ² + η²/n · [φ_jk,φ_jk]_n)^{-2}`, normalized to sum
/// to one. Bin-shift invariant on an aligned grid; `k` is checked for range
/// only.
pub fn oracle_weights(
    sigma_sq: f64,
    eta_sq: f64,
    k: usize,
    n: usize,
    cfg: &TuningConfig,
) -> Result<Vec<f64>> {
    check_jk(1, k, n, cfg)?;
    if !(sigma_sq > 0.0) {
        return Err(VolJumpError::parameter(
            "oracle weights require sigma_sq > 0 (clamp pilots first)",
        ));
    }
    if !(eta_sq >= 0.0) {
        return Err(VolJumpError::parameter("eta_sq must be nonnegative"));
    }
    let tabs = tables(n, cfg.bins);
    let nf = n as f64;
    let mut w: Vec<f64> = tabs
        .phi_norms
        .iter()
        .map(|&norm| {
            let d = sigma_sq + eta_sq / nf * norm;
            1.0 / (d * d)
        })
        .collect();
    let total: f64 = w.iter().sum();
    for x in &mut w {
        *x /= total;
    }
    Ok(w)
}

/// Adaptive spot volatility estimate for bin `k`:
/// `σ̂² = Σ_{j≤cutoff} w̃_j (S²_jk(Y) - [φ_jk,φ_jk]_n η̂²/n)`, where `w̃` are
/// the supplied weights restricted to `j ≤ cutoff` and renormalized.
/// Sign-unrestricted due to the bias correction.
pub fn spot_vol_estimate(
    obs: &ObservationSeries,
    k: usize,
    weights: &[f64],
    eta_hat_sq: f64,
    cfg: &TuningConfig,
) -> Result<f64> {
    let n = obs.n();
    cfg.validate(n)?;
    check_jk(1, k, n, cfg)?;
    if weights.len() < cfg.cutoff {
        return Err(VolJumpError::parameter(
            "weight vector shorter than spectral cutoff",
        ));
    }
    let tabs = tables(n, cfg.bins);
    let kept: f64 = weights[..cfg.cutoff].iter().sum();
    let mut acc = 0.0;
    for j in 1..=cfg.cutoff {
        let s = spectral_statistic(obs, j, k, cfg)?;
        acc += weights[j - 1] / kept * (s * s - tabs.phi_norm(j) * eta_hat_sq / n as f64);
    }
    Ok(acc)
}

/// Block aggregates of a per-bin spot volatility sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAverages {
    /// Non-overlapping big-block means, `⌊bins/block_len⌋` entries.
    pub plain: Vec<f64>,
    /// Overlapping backward means for `i = block_len..=bins` (entry 0 is
    /// `i = block_len`).
    pub overlap: Vec<f64>,
    /// As `overlap` but with bins exceeding `h^{τ-1}` in absolute value
    /// zeroed out; the divisor stays `block_len`.
    pub trunc: Vec<f64>,
}

/// Computes the non-overlapping, overlapping, and truncated block series
/// from per-bin spot estimates.
pub fn block_averages(per_bin: &[f64], cfg: &TuningConfig) -> Result<BlockAverages> {
    let bins = per_bin.len();
    let alpha = cfg.block_len;
    if alpha == 0 || alpha > bins {
        return Err(VolJumpError::parameter(format!(
            "block_len = {alpha} incompatible with {bins} bins"
        )));
    }
    let af = alpha as f64;
    let threshold = cfg.truncation_threshold();
    let plain = (0..bins / alpha)
        .map(|i| per_bin[i * alpha..(i + 1) * alpha].iter().sum::<f64>() / af)
        .collect();
    let mut overlap = Vec::with_capacity(bins - alpha + 1);
    let mut trunc = Vec::with_capacity(bins - alpha + 1);
    for i in alpha..=bins {
        let window = &per_bin[i - alpha..i];
        overlap.push(window.iter().sum::<f64>() / af);
        trunc.push(
            window
                .iter()
                .filter(|v| v.abs() <= threshold)
                .sum::<f64>()
                / af,
        );
    }
    Ok(BlockAverages {
        plain,
        overlap,
        trunc,
    })
}

/// Full adaptive estimation output for one observation series.
#[derive(Debug, Clone)]
pub struct SpotVolSeries {
    /// Adaptive spot estimates `σ̂²_{(k-1)h}`, `k = 1..=bins`.
    pub per_bin: Vec<f64>,
    /// Estimated noise variance `η̂²`.
    pub noise_var_hat: f64,
    /// Noise variance used in weights and bias corrections (the known value
    /// when configured, otherwise `η̂²`).
    pub noise_var_used: f64,
    /// Block aggregates of `per_bin`.
    pub blocks: BlockAverages,
    /// Adaptive weights per bin, restricted to `j ≤ cutoff` and
    /// renormalized, row-major `bins × cutoff`.
    weights: Vec<f64>,
    cutoff: usize,
}

impl SpotVolSeries {
    /// Renormalized adaptive weights for bin `k` (1-based), length `cutoff`.
    pub fn weights(&self, k: usize) -> &[f64] {
        &self.weights[(k - 1) * self.cutoff..k * self.cutoff]
    }
}

fn compute_spectral_table(
    obs: &ObservationSeries,
    cfg: &TuningConfig,
    jmax: usize,
) -> Vec<Vec<f64>> {
    let n = obs.n();
    let m = cfg.samples_per_bin(n);
    let tabs = tables(n, cfg.bins);
    let scale = (2.0 * cfg.bins as f64).sqrt();
    let values = obs.values();
    let mut out = Vec::with_capacity(cfg.bins);
    for k in 0..cfg.bins {
        let base = k * m;
        let mut row = vec![0.0f64; jmax];
        for j in 1..=jmax {
            let srow = &tabs.sine[(j - 1) * (m - 1)..j * (m - 1)];
            let mut acc = 0.0;
            for offset in 1..m {
                acc += (values[base + offset] - values[base + offset - 1]) * srow[offset - 1];
            }
            row[j - 1] = scale * acc;
        }
        out.push(row);
    }
    out
}

/// Runs the two-stage adaptive pipeline: noise variance, pilot estimates,
/// estimated weights, per-bin spot estimates and block aggregates.
pub fn estimate_spot_vol(obs: &ObservationSeries, cfg: &TuningConfig) -> Result<SpotVolSeries> {
    let n = obs.n();
    cfg.validate(n)?;
    let eta_hat_sq = noise_variance_hat(obs);
    let eta_used = cfg.noise_variance.unwrap_or(eta_hat_sq);
    let stats = compute_spectral_table(obs, cfg, cfg.cutoff);
    estimate_with_table(obs, cfg, &stats, eta_hat_sq, eta_used, None)
}

/// As [`estimate_spot_vol`] but with externally supplied per-bin weights
/// (each of length `cutoff`, already renormalized), skipping the pilot
/// stage. Used by the bootstrap, which reuses the original-path weights.
pub(crate) fn estimate_spot_vol_with_weights(
    obs: &ObservationSeries,
    cfg: &TuningConfig,
    weights: &SpotVolSeries,
    eta_hat_sq: f64,
    eta_used: f64,
) -> Result<SpotVolSeries> {
    cfg.validate(obs.n())?;
    let stats = compute_spectral_table(obs, cfg, cfg.cutoff);
    estimate_with_table(obs, cfg, &stats, eta_hat_sq, eta_used, Some(weights))
}

fn estimate_with_table(
    obs: &ObservationSeries,
    cfg: &TuningConfig,
    stats: &[Vec<f64>],
    eta_hat_sq: f64,
    eta_used: f64,
    reuse_weights: Option<&SpotVolSeries>,
) -> Result<SpotVolSeries> {
    let n = obs.n();
    let nf = n as f64;
    let tabs = tables(n, cfg.bins);
    let cutoff = cfg.cutoff;
    let mut per_bin = Vec::with_capacity(cfg.bins);
    let mut all_weights = Vec::with_capacity(cfg.bins * cutoff);
    for k in 1..=cfg.bins {
        let w_slice: Vec<f64> = match reuse_weights {
            Some(src) => src.weights(k).to_vec(),
            None => {
                let pilot =
                    pilot_from_table(stats, &tabs, k, cfg, eta_used, n).max(PILOT_FLOOR);
                // weights are normalized over the full frequency range, then
                // the kept head is renormalized
                let full = oracle_weights(pilot, eta_used, k, n, cfg)?;
                let kept: f64 = full[..cutoff].iter().sum();
                full[..cutoff].iter().map(|w| w / kept).collect()
            }
        };
        let mut est = 0.0;
        for j in 1..=cutoff {
            let s = stats[k - 1][j - 1];
            est += w_slice[j - 1] * (s * s - tabs.phi_norm(j) * eta_used / nf);
        }
        per_bin.push(est);
        all_weights.extend_from_slice(&w_slice);
    }
    let blocks = block_averages(&per_bin, cfg)?;
    Ok(SpotVolSeries {
        per_bin,
        noise_var_hat: eta_hat_sq,
        noise_var_used: eta_used,
        blocks,
        weights: all_weights,
        cutoff,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small_cfg() -> TuningConfig {
        // n = 3000, 12 bins of 250 samples
        TuningConfig {
            bins: 12,
            block_len: 3,
            cutoff: 50,
            pilot_freqs: 20,
            ..TuningConfig::default()
        }
    }

    #[test]
    fn sine_basis_peak_and_support() {
        let cfg = small_cfg();
        let h = cfg.bin_width();
        let n = 3000;
        // sine peak at bin midpoint
        let v = sine_basis(1, 1, h / 2.0, n, &cfg).unwrap();
        assert_abs_diff_eq!(v, (2.0 / h).sqrt(), epsilon = 1e-12);
        // zero outside the bin
        assert_eq!(sine_basis(3, 1, 1.5 * h, n, &cfg).unwrap(), 0.0);
        assert_eq!(sine_basis(2, 5, 0.0, n, &cfg).unwrap(), 0.0);
        // out-of-range j and k
        assert!(sine_basis(0, 1, 0.0, n, &cfg).is_err());
        assert!(sine_basis(250, 1, 0.0, n, &cfg).is_err());
        assert!(sine_basis(1, 13, 0.0, n, &cfg).is_err());
    }

    #[test]
    fn phi_basis_at_zero_and_small_angle() {
        let cfg = small_cfg();
        let n = 3000usize;
        let h = cfg.bin_width();
        let v = phi_basis(1, 1, 0.0, n, &cfg).unwrap();
        let expect = 2.0 * n as f64 * (2.0 / h).sqrt() * (PI / (2.0 * n as f64 * h)).sin();
        assert_abs_diff_eq!(v, expect, epsilon = 1e-9);
        assert_eq!(phi_basis(1, 1, 2.0 * h, n, &cfg).unwrap(), 0.0);
        // small-angle: 2n sin(jπ/(2nh)) ≈ jπ/h for nh = 250, j = 1
        let lhs = 2.0 * n as f64 * (PI / (2.0 * n as f64 * h)).sin();
        let rhs = PI / h;
        assert!((lhs - rhs).abs() / rhs < 1e-4);
    }

    #[test]
    fn scalar_product_constants_and_orthogonality() {
        assert_abs_diff_eq!(
            empirical_scalar_product(|_| 1.0, |_| 1.0, 1000),
            1.0,
            epsilon = 1e-14
        );
        let cfg = TuningConfig::default();
        let n = 30_000;
        let f = |t: f64| sine_basis(1, 1, t, n, &cfg).unwrap();
        let g = |t: f64| sine_basis(2, 1, t, n, &cfg).unwrap();
        assert_abs_diff_eq!(empirical_scalar_product(f, g, n), 0.0, epsilon = 1e-8);
    }

    #[test]
    fn phi_norm_matches_scalar_product_and_closed_form() {
        let cfg = small_cfg();
        let n = 3000;
        for j in [1usize, 5, 40, 249] {
            let cached = phi_norm(j, n, &cfg).unwrap();
            let f = |t: f64| phi_basis(j, 1, t, n, &cfg).unwrap();
            let direct = empirical_scalar_product(f, f, n);
            assert_abs_diff_eq!(cached, direct, epsilon = 1e-6 * cached.abs().max(1.0));
            // cos² over the midpoint grid sums to M/2, giving 4n² sin²(jπ/2M)
            let m = (n / cfg.bins) as f64;
            let closed = 4.0 * (n as f64).powi(2) * (j as f64 * PI / (2.0 * m)).sin().powi(2);
            assert!((cached - closed).abs() / closed < 1e-10);
        }
        assert!(phi_norm(j_out_of_range(), n, &cfg).is_err());
    }

    fn j_out_of_range() -> usize {
        250
    }

    #[test]
    fn phi_norm_shift_invariant() {
        let cfg = small_cfg();
        let n = 3000;
        let j = 7;
        let f1 = |t: f64| phi_basis(j, 1, t, n, &cfg).unwrap();
        let f4 = |t: f64| phi_basis(j, 4, t, n, &cfg).unwrap();
        let a = empirical_scalar_product(&f1, &f1, n);
        let b = empirical_scalar_product(&f4, &f4, n);
        assert_abs_diff_eq!(a, b, epsilon = 1e-6 * a);
    }

    #[test]
    fn spectral_statistic_basics() {
        let cfg = small_cfg();
        let n = 3000usize;
        let obs = ObservationSeries::new(vec![1.25; n + 1]).unwrap();
        for j in [1, 3, 17] {
            for k in [1, 6, 12] {
                assert_eq!(spectral_statistic(&obs, j, k, &cfg).unwrap(), 0.0);
            }
        }
        // single unit increment inside bin 2 picks out Φ_jk(i/n)
        let mut vals = vec![0.0; n + 1];
        let i = 300; // inside bin 2 (samples 250..500)
        for v in vals.iter_mut().skip(i) {
            *v = 1.0;
        }
        let obs = ObservationSeries::new(vals).unwrap();
        let j = 3;
        let expect = sine_basis(j, 2, i as f64 / n as f64, n, &cfg).unwrap();
        assert_abs_diff_eq!(
            spectral_statistic(&obs, j, 2, &cfg).unwrap(),
            expect,
            epsilon = 1e-10
        );
        // and bins not containing the step see nothing
        assert_eq!(spectral_statistic(&obs, j, 4, &cfg).unwrap(), 0.0);
    }

    #[test]
    fn spectral_statistic_linear_series_matches_bruteforce() {
        // nh = 250 as in the documented example
        let cfg = small_cfg();
        let n = 3000usize;
        let vals: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let obs = ObservationSeries::new(vals).unwrap();
        let got = spectral_statistic(&obs, 1, 1, &cfg).unwrap();
        // brute-force double loop straight from the definition
        let mut expect = 0.0;
        for i in 1..=n {
            let di = 1.0 / n as f64;
            expect += di * sine_basis(1, 1, i as f64 / n as f64, n, &cfg).unwrap();
        }
        assert_abs_diff_eq!(got, expect, epsilon = 1e-12);
    }

    #[test]
    fn noise_variance_edge_cases() {
        let obs = ObservationSeries::new(vec![2.0; 101]).unwrap();
        assert_eq!(noise_variance_hat(&obs), 0.0);
        // one unit increment, n = 2 -> 1/4
        let obs = ObservationSeries::new(vec![0.0, 1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(noise_variance_hat(&obs), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn pilot_zero_observations() {
        let cfg = small_cfg();
        let n = 3000;
        let obs = ObservationSeries::new(vec![0.0; n + 1]).unwrap();
        // with eta = 0 the pilot is exactly zero
        assert_eq!(pilot_spot_vol(&obs, 5, &cfg, 0.0).unwrap(), 0.0);
        // with eta > 0 only the (negative) bias correction remains
        let p = pilot_spot_vol(&obs, 5, &cfg, 1e-4).unwrap();
        assert!(p < 0.0);
    }

    #[test]
    fn oracle_weights_uniform_without_noise() {
        let cfg = small_cfg();
        let n = 3000;
        let w = oracle_weights(0.01, 0.0, 1, n, &cfg).unwrap();
        assert_eq!(w.len(), 249);
        for &x in &w {
            assert_abs_diff_eq!(x, 1.0 / 249.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn oracle_weights_normalized_and_monotone() {
        let cfg = TuningConfig::default();
        let n = 30_000;
        let w = oracle_weights(0.01, 2.5e-5, 3, n, &cfg).unwrap();
        assert_eq!(w.len(), 249);
        let sum: f64 = w.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-12);
        for pair in w.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-18);
        }
        assert!(oracle_weights(0.0, 1e-5, 1, n, &cfg).is_err());
        assert!(oracle_weights(-1.0, 1e-5, 1, n, &cfg).is_err());
    }

    #[test]
    fn oracle_weights_tail_decay_slope() {
        // log-log slope of the weight tail is close to -4 where the noise
        // term dominates and jπ/(2nh) is still in the linear range of sin
        let cfg = TuningConfig::default();
        let n = 30_000;
        let w = oracle_weights(0.001, 2.5e-5, 1, n, &cfg).unwrap();
        let (lo, hi) = (20usize, 60usize);
        let pts: Vec<(f64, f64)> = (lo..=hi)
            .map(|j| ((j as f64).ln(), w[j - 1].ln()))
            .collect();
        let n_pts = pts.len() as f64;
        let mean_x = pts.iter().map(|p| p.0).sum::<f64>() / n_pts;
        let mean_y = pts.iter().map(|p| p.1).sum::<f64>() / n_pts;
        let slope = pts
            .iter()
            .map(|p| (p.0 - mean_x) * (p.1 - mean_y))
            .sum::<f64>()
            / pts.iter().map(|p| (p.0 - mean_x).powi(2)).sum::<f64>();
        assert!((slope + 4.0).abs() < 0.3, "tail slope {slope}");
    }

    #[test]
    fn spot_estimate_zero_observations() {
        let cfg = small_cfg();
        let n = 3000;
        let obs = ObservationSeries::new(vec![0.0; n + 1]).unwrap();
        let w = oracle_weights(0.01, 0.0, 1, n, &cfg).unwrap();
        assert_eq!(spot_vol_estimate(&obs, 1, &w, 0.0, &cfg).unwrap(), 0.0);
        let est = spot_vol_estimate(&obs, 1, &w, 1e-4, &cfg).unwrap();
        assert!(est < 0.0, "pure bias correction must be negative, got {est}");
    }

    #[test]
    fn block_averages_constant_input() {
        let cfg = small_cfg();
        let per_bin = vec![0.25; 12];
        let b = block_averages(&per_bin, &cfg).unwrap();
        assert_eq!(b.plain.len(), 4);
        assert_eq!(b.overlap.len(), 10);
        assert_eq!(b.trunc.len(), 10);
        for v in b.plain.iter().chain(&b.overlap).chain(&b.trunc) {
            assert_abs_diff_eq!(*v, 0.25, epsilon = 1e-15);
        }
    }

    #[test]
    fn block_averages_truncation_indicator() {
        let cfg = small_cfg();
        let threshold = cfg.truncation_threshold();
        let c = 0.5;
        let mut per_bin = vec![c; 12];
        per_bin[4] = threshold * 2.0; // one bin fires the indicator
        let b = block_averages(&per_bin, &cfg).unwrap();
        // overlap windows containing bin 5 keep the spike, trunc drops it
        // window for i = 5 is bins 3..=5 (0-based 2..5)
        let af = cfg.block_len as f64;
        let idx = 5 - cfg.block_len; // vec index of i = 5
        assert_abs_diff_eq!(
            b.trunc[idx],
            (af - 1.0) / af * c,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            b.overlap[idx],
            (2.0 * c + threshold * 2.0) / af,
            epsilon = 1e-15
        );
        // windows not touching bin 5 are identical
        assert_eq!(b.trunc[9], b.overlap[9]);
    }

    #[test]
    fn truncation_noop_below_threshold() {
        let cfg = small_cfg();
        let per_bin: Vec<f64> = (0..12).map(|i| 0.1 * (i as f64 - 6.0)).collect();
        let b = block_averages(&per_bin, &cfg).unwrap();
        assert_eq!(b.overlap, b.trunc);
    }

    #[test]
    fn block_len_too_large_rejected() {
        let mut cfg = small_cfg();
        cfg.block_len = 13;
        assert!(block_averages(&vec![0.0; 12], &cfg).is_err());
    }
}
