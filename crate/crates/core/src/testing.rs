//! Change-point test statistics, Gumbel critical values and rejection rules.
//!
//! Four rules are supported: non-overlapping blocks, overlapping blocks, and
//! their truncated (price-jump robust) counterparts. All four share the
//! Gumbel-type limit `P(V ≤ x) = exp(-π^{-1/2} e^{-x})` after the
//! rule-specific standardization.

use serde::{Deserialize, Serialize};

use crate::config::TuningConfig;
use crate::error::{Result, VolJumpError};
use crate::series::ObservationSeries;
use crate::spectral::{estimate_spot_vol, SpotVolSeries};

/// Which block series and rejection rule to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleKind {
    NonOverlap,
    Overlap,
    NonOverlapTrunc,
    OverlapTrunc,
}

impl RuleKind {
    pub fn is_overlap(self) -> bool {
        matches!(self, RuleKind::Overlap | RuleKind::OverlapTrunc)
    }

    pub fn is_truncated(self) -> bool {
        matches!(self, RuleKind::NonOverlapTrunc | RuleKind::OverlapTrunc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RuleKind::NonOverlap => "non-overlap",
            RuleKind::Overlap => "overlap",
            RuleKind::NonOverlapTrunc => "non-overlap-trunc",
            RuleKind::OverlapTrunc => "overlap-trunc",
        }
    }
}

/// A decision rule: statistic variant plus test level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestRule {
    pub kind: RuleKind,
    /// Test level α, strictly between 0 and 1.
    pub level: f64,
}

impl TestRule {
    pub fn new(kind: RuleKind, level: f64) -> Result<Self> {
        if !(level > 0.0 && level < 1.0) {
            return Err(VolJumpError::parameter("test level must lie in (0, 1)"));
        }
        Ok(Self { kind, level })
    }
}

/// Outcome of one test run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestReport {
    pub rule: TestRule,
    /// Raw maximum statistic `V̄`.
    pub statistic: f64,
    /// Standardized statistic (the left-hand side of the limit theorem for
    /// the chosen rule).
    pub standardized: f64,
    /// Rejection threshold for `statistic` at the rule's level.
    pub critical: f64,
    /// `1 - exp(-π^{-1/2} e^{-standardized})`, clipped to [0, 1].
    pub p_value: f64,
    pub reject: bool,
    /// Block index attaining the maximum (left block for non-overlapping
    /// rules, bin index `i` of the backward window for overlapping rules).
    pub argmax_index: usize,
    /// Number of non-overlapping big blocks `m_n`.
    pub m_n: usize,
    /// Centering sequence `γ_{m_n} = √(4 log m_n - 2 log log m_n)`.
    pub gamma_m_n: f64,
    /// Estimated noise variance `η̂²`.
    pub noise_var_hat: f64,
    /// Set when a zero denominator made the statistic infinite.
    pub degenerate: bool,
}

/// Maximum rescaled difference over consecutive entries of a block series:
/// `max_i |(b_i - b_{i+1}) / (√(8η̂) |b_{i+1}|^{3/4})|`. Returns the maximum
/// and the left index attaining it (smallest on ties), plus a degeneracy
/// flag when a denominator vanished.
pub fn stat_nonoverlap(blocks: &[f64], eta_hat: f64) -> Result<(f64, usize, bool)> {
    if blocks.len() < 2 {
        return Err(VolJumpError::parameter(
            "need at least 2 blocks for the non-overlapping statistic",
        ));
    }
    if !(eta_hat >= 0.0) {
        return Err(VolJumpError::parameter("eta_hat must be nonnegative"));
    }
    Ok(max_rescaled_diff(blocks, eta_hat, 1, 0))
}

/// Maximum rescaled difference with shift `block_len` over the overlapping
/// block series (indexed `i = block_len..=bins`). The returned index is the
/// bin index `i` of the left window.
pub fn stat_overlap(
    blocks_ov: &[f64],
    eta_hat: f64,
    cfg: &TuningConfig,
) -> Result<(f64, usize, bool)> {
    let alpha = cfg.block_len;
    if blocks_ov.len() <= alpha {
        return Err(VolJumpError::parameter(
            "overlapping series too short for the block shift",
        ));
    }
    if !(eta_hat >= 0.0) {
        return Err(VolJumpError::parameter("eta_hat must be nonnegative"));
    }
    Ok(max_rescaled_diff(blocks_ov, eta_hat, alpha, alpha))
}

// Scans pairs (v[i], v[i + shift]); `index_base` maps vector positions back
// to the caller's index convention. Shared with the bootstrap, which uses a
// unit shift on the overlapping series for its pseudo statistic.
pub(crate) fn max_rescaled_diff(
    values: &[f64],
    eta_hat: f64,
    shift: usize,
    index_base: usize,
) -> (f64, usize, bool) {
    let denom_scale = (8.0 * eta_hat).sqrt();
    let mut best = f64::NEG_INFINITY;
    let mut best_idx = index_base;
    let mut degenerate = false;
    for i in 0..values.len() - shift {
        let num = (values[i] - values[i + shift]).abs();
        let denom = denom_scale * values[i + shift].abs().powf(0.75);
        let v = if denom == 0.0 {
            degenerate = true;
            f64::INFINITY
        } else {
            num / denom
        };
        if v > best {
            best = v;
            best_idx = index_base + i;
        }
    }
    (best, best_idx, degenerate)
}

/// `(1-α)`-quantile of the limit law: `c_α = -log(-log(1-α)) - ½ log π`.
pub fn gumbel_quantile(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(VolJumpError::parameter("alpha must lie in (0, 1)"));
    }
    Ok(-(-(1.0 - alpha).ln()).ln() - 0.5 * std::f64::consts::PI.ln())
}

/// CDF of the limit law, `P(V ≤ x) = exp(-π^{-1/2} e^{-x})`.
pub fn gumbel_cdf(x: f64) -> f64 {
    (-std::f64::consts::PI.powf(-0.5) * (-x).exp()).exp()
}

/// Centering sequence `γ_m = √(4 log m - 2 log log m)`.
pub fn gamma_m(m: usize) -> f64 {
    let lm = (m as f64).ln();
    (4.0 * lm - 2.0 * lm.ln()).sqrt()
}

/// Rejection threshold for the raw statistic `V̄` under the given rule.
///
/// Non-overlapping rules: `α_n^{-1/2} ((log m_n)^{-1/2} c_α + γ_{m_n})`.
/// Overlapping rules: `(c_α + 2 log m_n + ½ log log m_n + log 3) /
/// √(α_n log m_n)`. Truncation does not change the thresholds.
pub fn critical_value(rule: &TestRule, cfg: &TuningConfig) -> Result<f64> {
    let m = cfg.num_blocks();
    if m < 3 {
        return Err(VolJumpError::parameter(
            "need m_n >= 3 non-overlapping blocks for the standardization",
        ));
    }
    let c = gumbel_quantile(rule.level)?;
    let lm = (m as f64).ln();
    let alpha_n = cfg.block_len as f64;
    let value = if rule.kind.is_overlap() {
        (c + 2.0 * lm + 0.5 * lm.ln() + 3f64.ln()) / (lm * alpha_n).sqrt()
    } else {
        (c / lm.sqrt() + gamma_m(m)) / alpha_n.sqrt()
    };
    Ok(value)
}

/// Standardizes a raw statistic per the rule's limit theorem.
pub fn standardize(statistic: f64, kind: RuleKind, cfg: &TuningConfig) -> f64 {
    let m = cfg.num_blocks() as f64;
    let lm = m.ln();
    let alpha_n = cfg.block_len as f64;
    if kind.is_overlap() {
        lm.sqrt() * alpha_n.sqrt() * statistic - 2.0 * lm - 0.5 * lm.ln() - 3f64.ln()
    } else {
        lm.sqrt() * (alpha_n.sqrt() * statistic - gamma_m(cfg.num_blocks()))
    }
}

/// Extracts the block series the rule operates on, already estimated.
/// For the truncated non-overlapping rule this is the truncated overlapping
/// series sampled at block-start indices `i·α_n`.
pub fn rule_blocks(spot: &SpotVolSeries, kind: RuleKind, cfg: &TuningConfig) -> Vec<f64> {
    match kind {
        RuleKind::NonOverlap => spot.blocks.plain.clone(),
        RuleKind::Overlap => spot.blocks.overlap.clone(),
        RuleKind::OverlapTrunc => spot.blocks.trunc.clone(),
        RuleKind::NonOverlapTrunc => {
            let alpha = cfg.block_len;
            // RV^tr at i = α_n, 2α_n, ..., m_n α_n; vec index i - α_n
            (1..=cfg.num_blocks())
                .map(|i| spot.blocks.trunc[(i - 1) * alpha])
                .collect()
        }
    }
}

/// Computes the raw maximum statistic for a rule from estimated spot
/// volatility, returning `(value, argmax index, degenerate)`.
pub fn statistic_for_rule(
    spot: &SpotVolSeries,
    kind: RuleKind,
    eta_hat: f64,
    cfg: &TuningConfig,
) -> Result<(f64, usize, bool)> {
    let blocks = rule_blocks(spot, kind, cfg);
    if kind.is_overlap() {
        stat_overlap(&blocks, eta_hat, cfg)
    } else {
        stat_nonoverlap(&blocks, eta_hat)
    }
}

/// Full pipeline: estimate spot volatility, evaluate the rule's statistic,
/// standardize, and decide.
pub fn run_test(obs: &ObservationSeries, rule: &TestRule, cfg: &TuningConfig) -> Result<TestReport> {
    let spot = estimate_spot_vol(obs, cfg)?;
    run_test_on_spot(&spot, rule, cfg)
}

/// As [`run_test`] but on an already estimated [`SpotVolSeries`], so several
/// rules can share one estimation pass.
pub fn run_test_on_spot(
    spot: &SpotVolSeries,
    rule: &TestRule,
    cfg: &TuningConfig,
) -> Result<TestReport> {
    let m = cfg.num_blocks();
    let eta_hat = spot.noise_var_hat.sqrt();
    let eta_stat = match cfg.noise_variance {
        Some(v) if cfg.use_known_eta_in_stat => v.sqrt(),
        _ => eta_hat,
    };
    let (statistic, argmax_index, degenerate) =
        statistic_for_rule(spot, rule.kind, eta_stat, cfg)?;
    let critical = critical_value(rule, cfg)?;
    let standardized = standardize(statistic, rule.kind, cfg);
    let p_value = (1.0 - gumbel_cdf(standardized)).clamp(0.0, 1.0);
    let reject = statistic >= critical;
    Ok(TestReport {
        rule: *rule,
        statistic,
        standardized,
        critical,
        p_value,
        reject,
        argmax_index,
        m_n: m,
        gamma_m_n: gamma_m(m),
        noise_var_hat: spot.noise_var_hat,
        degenerate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> TuningConfig {
        TuningConfig::default()
    }

    #[test]
    fn nonoverlap_constant_blocks() {
        let (v, idx, deg) = stat_nonoverlap(&[0.3, 0.3, 0.3], 0.05).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(idx, 0);
        assert!(!deg);
    }

    #[test]
    fn nonoverlap_hand_example() {
        // blocks [0.01, 0.01, 0.02], η̂² = 0.005
        let eta_hat = 0.005f64.sqrt();
        let (v, idx, deg) = stat_nonoverlap(&[0.01, 0.01, 0.02], eta_hat).unwrap();
        let expect = (0.01f64 - 0.02).abs() / ((8.0 * eta_hat).sqrt() * 0.02f64.powf(0.75));
        assert_abs_diff_eq!(v, expect, epsilon = 1e-14);
        assert_eq!(idx, 1);
        assert!(!deg);
    }

    #[test]
    fn nonoverlap_sign_flip_invariant() {
        let blocks = [0.01, -0.015, 0.02, 0.018];
        let neg: Vec<f64> = blocks.iter().map(|b| -b).collect();
        let a = stat_nonoverlap(&blocks, 0.07).unwrap();
        let b = stat_nonoverlap(&neg, 0.07).unwrap();
        assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-14);
        assert_eq!(a.1, b.1);
    }

    #[test]
    fn nonoverlap_degenerate_denominator() {
        let (v, _, deg) = stat_nonoverlap(&[0.01, 0.0, 0.02], 0.05).unwrap();
        assert!(v.is_infinite());
        assert!(deg);
    }

    #[test]
    fn overlap_constant_blocks() {
        let c = cfg();
        let blocks = vec![0.4; c.bins - c.block_len + 1];
        let (v, idx, deg) = stat_overlap(&blocks, 0.05, &c).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(idx, c.block_len);
        assert!(!deg);
    }

    #[test]
    fn overlap_with_unit_shift_matches_nonoverlap() {
        let mut c = cfg();
        c.block_len = 1;
        let blocks = [0.01, 0.013, 0.02, 0.011];
        let a = stat_overlap(&blocks, 0.05, &c).unwrap();
        let b = stat_nonoverlap(&blocks, 0.05).unwrap();
        assert_abs_diff_eq!(a.0, b.0, epsilon = 1e-14);
    }

    #[test]
    fn overlap_argmax_near_step() {
        // per-bin step at bin 60 -> overlapping block argmax within α_n of it
        let c = cfg();
        let per_bin: Vec<f64> = (1..=c.bins)
            .map(|k| if k <= 60 { 0.01 } else { 0.21 })
            .collect();
        let blocks = crate::spectral::block_averages(&per_bin, &c).unwrap();
        let (_, idx, _) = stat_overlap(&blocks.overlap, 0.05, &c).unwrap();
        // brute-force scan over the definition
        let alpha = c.block_len;
        let denom = |x: f64| (8.0f64 * 0.05).sqrt() * x.abs().powf(0.75);
        let mut best = (f64::NEG_INFINITY, 0usize);
        for i in alpha..=c.bins - alpha {
            let a = blocks.overlap[i - alpha];
            let b = blocks.overlap[i];
            let v = (a - b).abs() / denom(b);
            if v > best.0 {
                best = (v, i);
            }
        }
        assert_eq!(idx, best.1);
        assert!((idx as i64 - 60).unsigned_abs() as usize <= alpha);
    }

    #[test]
    fn gumbel_quantile_values() {
        assert_abs_diff_eq!(gumbel_quantile(0.1).unwrap(), 1.6780, epsilon = 1e-4);
        assert_abs_diff_eq!(gumbel_quantile(0.5).unwrap(), -0.2059, epsilon = 1e-4);
        assert!(gumbel_quantile(0.0).is_err());
        assert!(gumbel_quantile(1.0).is_err());
    }

    #[test]
    fn gumbel_quantile_round_trip() {
        for i in 1..100 {
            let alpha = i as f64 / 100.0;
            let q = gumbel_quantile(alpha).unwrap();
            assert_abs_diff_eq!(gumbel_cdf(q), 1.0 - alpha, epsilon = 1e-12);
        }
    }

    #[test]
    fn critical_value_reference_config() {
        // h^{-1} = 120, α_n = 15 -> m_n = 8
        let c = cfg();
        let r = TestRule::new(RuleKind::NonOverlap, 0.1).unwrap();
        let cv = critical_value(&r, &c).unwrap();
        let gamma = (4.0 * 8f64.ln() - 2.0 * 8f64.ln().ln()).sqrt();
        assert_abs_diff_eq!(gamma, 2.61793, epsilon = 1e-4);
        let expect = (8f64.ln().powf(-0.5) * 1.6780 + gamma) / 15f64.sqrt();
        assert_abs_diff_eq!(cv, expect, epsilon = 1e-4);
        assert_abs_diff_eq!(cv, 0.9764, epsilon = 1e-3);

        let r_ov = TestRule::new(RuleKind::Overlap, 0.1).unwrap();
        let cv_ov = critical_value(&r_ov, &c).unwrap();
        let lm = 8f64.ln();
        let expect_ov =
            (gumbel_quantile(0.1).unwrap() + 2.0 * lm + 0.5 * lm.ln() + 3f64.ln())
                / (lm * 15.0).sqrt();
        assert_abs_diff_eq!(cv_ov, expect_ov, epsilon = 1e-12);

        // truncated rules share the thresholds
        let rt = TestRule::new(RuleKind::NonOverlapTrunc, 0.1).unwrap();
        assert_eq!(critical_value(&rt, &c).unwrap(), cv);
        let rot = TestRule::new(RuleKind::OverlapTrunc, 0.1).unwrap();
        assert_eq!(critical_value(&rot, &c).unwrap(), cv_ov);
    }

    #[test]
    fn critical_value_needs_three_blocks() {
        let mut c = cfg();
        c.block_len = 60; // m_n = 2
        let r = TestRule::new(RuleKind::NonOverlap, 0.1).unwrap();
        assert!(critical_value(&r, &c).is_err());
    }

    #[test]
    fn threshold_monotone_in_level() {
        let c = cfg();
        for kind in [
            RuleKind::NonOverlap,
            RuleKind::Overlap,
            RuleKind::NonOverlapTrunc,
            RuleKind::OverlapTrunc,
        ] {
            let mut prev = f64::INFINITY;
            for i in 1..10 {
                let rule = TestRule::new(kind, i as f64 / 10.0).unwrap();
                let cv = critical_value(&rule, &c).unwrap();
                assert!(cv < prev, "critical value must decrease in level");
                prev = cv;
            }
        }
    }

    #[test]
    fn scale_quarter_power() {
        let blocks = [0.011, 0.009, 0.014, 0.02, 0.01];
        let lambda = 3.7;
        let scaled: Vec<f64> = blocks.iter().map(|b| b * lambda).collect();
        let (a, ia, _) = stat_nonoverlap(&blocks, 0.05).unwrap();
        let (b, ib, _) = stat_nonoverlap(&scaled, 0.05).unwrap();
        assert_abs_diff_eq!(b, a * lambda.powf(0.25), epsilon = 1e-10);
        assert_eq!(ia, ib);
    }

    #[test]
    fn reject_iff_p_below_level() {
        // decision coherence: reject <=> p <= alpha, both via the standardization
        let c = cfg();
        for kind in [RuleKind::NonOverlap, RuleKind::Overlap] {
            for level in [0.05, 0.1, 0.5] {
                let rule = TestRule::new(kind, level).unwrap();
                let cv = critical_value(&rule, &c).unwrap();
                for stat in [0.5 * cv, 0.99 * cv, cv, 1.01 * cv, 2.0 * cv] {
                    let z = standardize(stat, kind, &c);
                    let p = 1.0 - gumbel_cdf(z);
                    let reject = stat >= cv;
                    assert_eq!(
                        reject,
                        p <= level + 1e-12,
                        "kind {kind:?} level {level} stat {stat} p {p}"
                    );
                }
            }
        }
    }

    #[test]
    fn all_constant_observations_degenerate() {
        let c = cfg();
        let obs = ObservationSeries::new(vec![4.0; 30_001]).unwrap();
        let rule = TestRule::new(RuleKind::OverlapTrunc, 0.1).unwrap();
        let report = run_test(&obs, &rule, &c).unwrap();
        assert!(report.degenerate);
        assert!(report.reject);
    }
}
