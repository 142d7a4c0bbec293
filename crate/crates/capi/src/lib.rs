//! C interface to the volatility jump detection library.
//!
//! Conventions: every fallible function returns a [`VjStatus`] code and
//! writes its result through out-pointers. Series are opaque handles owned
//! by the library; free them with [`vj_series_free`]. On error, a
//! human-readable message for the calling thread is available through
//! [`vj_last_error_message`]. All functions catch panics and report them as
//! `VJ_STATUS_INTERNAL` instead of unwinding across the FFI boundary.

use std::cell::RefCell;
use std::os::raw::c_char;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use voljump::bootstrap::{bootstrap_test, BootstrapConfig};
use voljump::changepoint::estimate_changepoint;
use voljump::config::TuningConfig;
use voljump::error::VolJumpError;
use voljump::series::ObservationSeries;
use voljump::spectral::estimate_spot_vol;
use voljump::testing::{run_test, RuleKind, TestRule};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(non_camel_case_types)] // C-style constant names for the header
pub enum VjStatus {
    /// Success.
    VJ_STATUS_OK = 0,
    /// A parameter was out of range or inconsistent.
    VJ_STATUS_PARAMETER = 1,
    /// The input data was malformed.
    VJ_STATUS_FORMAT = 2,
    /// A required pointer argument was null.
    VJ_STATUS_NULL_POINTER = 3,
    /// An internal invariant failed.
    VJ_STATUS_INTERNAL = 4,
}

/// Statistic variants, matching the library's rule kinds.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[allow(non_camel_case_types)] // C-style constant names for the header
pub enum VjRuleKind {
    VJ_RULE_NON_OVERLAP = 0,
    VJ_RULE_OVERLAP = 1,
    VJ_RULE_NON_OVERLAP_TRUNC = 2,
    VJ_RULE_OVERLAP_TRUNC = 3,
}

impl From<VjRuleKind> for RuleKind {
    fn from(k: VjRuleKind) -> Self {
        match k {
            VjRuleKind::VJ_RULE_NON_OVERLAP => RuleKind::NonOverlap,
            VjRuleKind::VJ_RULE_OVERLAP => RuleKind::Overlap,
            VjRuleKind::VJ_RULE_NON_OVERLAP_TRUNC => RuleKind::NonOverlapTrunc,
            VjRuleKind::VJ_RULE_OVERLAP_TRUNC => RuleKind::OverlapTrunc,
        }
    }
}

/// Tuning parameters. Initialize with [`vj_config_default`] and override
/// fields as needed. `noise_variance` is only honored when
/// `has_noise_variance` is nonzero.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VjConfig {
    pub bins: usize,
    pub block_len: usize,
    pub tau: f64,
    pub regularity: f64,
    pub pilot_freqs: usize,
    pub cutoff: usize,
    pub has_noise_variance: i32,
    pub noise_variance: f64,
    pub use_known_eta_in_stat: i32,
}

impl From<&VjConfig> for TuningConfig {
    fn from(c: &VjConfig) -> Self {
        TuningConfig {
            bins: c.bins,
            block_len: c.block_len,
            tau: c.tau,
            regularity: c.regularity,
            pilot_freqs: c.pilot_freqs,
            cutoff: c.cutoff,
            noise_variance: (c.has_noise_variance != 0).then_some(c.noise_variance),
            use_known_eta_in_stat: c.use_known_eta_in_stat != 0,
        }
    }
}

/// Test outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VjTestResult {
    /// Raw maximum statistic.
    pub statistic: f64,
    /// Statistic after the rule's limit-theorem standardization.
    pub standardized: f64,
    /// Rejection threshold for the raw statistic.
    pub critical: f64,
    pub p_value: f64,
    /// 1 when the null of no volatility jump is rejected.
    pub reject: i32,
    /// 1 when a vanishing denominator made the statistic infinite.
    pub degenerate: i32,
    /// Block index attaining the maximum.
    pub argmax_index: usize,
    /// Estimated noise variance.
    pub noise_var_hat: f64,
}

/// Bootstrap-calibrated test outcome.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VjBootstrapResult {
    /// Outcome of the asymptotic rule on the original data.
    pub asymptotic: VjTestResult,
    /// Bootstrap critical value for the raw statistic.
    pub quantile: f64,
    /// 1 when the bootstrap rule rejects.
    pub reject: i32,
    /// Fraction of pseudo statistics at or above the original one.
    pub p_value: f64,
    /// Pseudo samples with a degenerate statistic.
    pub degenerate_replications: usize,
}

/// Change-point estimate.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct VjChangePoint {
    /// Estimated jump time in (0, 1).
    pub theta_hat: f64,
    /// Bin index attaining the maximum.
    pub argmax_bin: usize,
}

/// Opaque observation series handle.
pub struct VjSeries {
    inner: ObservationSeries,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn status_of(err: &VolJumpError) -> VjStatus {
    match err {
        VolJumpError::Parameter(_) => VjStatus::VJ_STATUS_PARAMETER,
        VolJumpError::Format(_) => VjStatus::VJ_STATUS_FORMAT,
    }
}

fn fail(err: VolJumpError) -> VjStatus {
    let status = status_of(&err);
    set_error(err.to_string());
    status
}

fn guarded(f: impl FnOnce() -> VjStatus) -> VjStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic");
            VjStatus::VJ_STATUS_INTERNAL
        }
    }
}

macro_rules! require_nonnull {
    ($($ptr:ident),+) => {
        $(
            if $ptr.is_null() {
                set_error(concat!("null pointer argument: ", stringify!($ptr)));
                return VjStatus::VJ_STATUS_NULL_POINTER;
            }
        )+
    };
}

/// Copies the calling thread's last error message into `buf` (NUL-terminated,
/// truncated to `len` bytes) and returns the full message length in bytes,
/// excluding the terminator. `buf` may be null to query the length.
#[no_mangle]
pub unsafe extern "C" fn vj_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a series from `len` observation values (the path sampled at
/// `len - 1 + 1` grid points; at least 2 finite values). On success writes
/// an owned handle to `out`.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vj_series_new(
    values: *const f64,
    len: usize,
    out: *mut *mut VjSeries,
) -> VjStatus {
    guarded(|| {
        require_nonnull!(values, out);
        let data = slice::from_raw_parts(values, len).to_vec();
        match ObservationSeries::new(data) {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(VjSeries { inner }));
                VjStatus::VJ_STATUS_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Frees a series handle. Null is a no-op.
///
/// # Safety
/// `series` must be a handle from [`vj_series_new`], not yet freed.
#[no_mangle]
pub unsafe extern "C" fn vj_series_free(series: *mut VjSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Number of increments `n` of the series (one less than the value count).
///
/// # Safety
/// `series` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vj_series_len(series: *const VjSeries, out: *mut usize) -> VjStatus {
    guarded(|| {
        require_nonnull!(series, out);
        *out = (*series).inner.n();
        VjStatus::VJ_STATUS_OK
    })
}

/// Writes the default tuning configuration to `out`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn vj_config_default(out: *mut VjConfig) -> VjStatus {
    guarded(|| {
        require_nonnull!(out);
        let d = TuningConfig::default();
        *out = VjConfig {
            bins: d.bins,
            block_len: d.block_len,
            tau: d.tau,
            regularity: d.regularity,
            pilot_freqs: d.pilot_freqs,
            cutoff: d.cutoff,
            has_noise_variance: 0,
            noise_variance: 0.0,
            use_known_eta_in_stat: 0,
        };
        VjStatus::VJ_STATUS_OK
    })
}

fn run_test_impl(
    series: &VjSeries,
    config: &VjConfig,
    kind: VjRuleKind,
    level: f64,
    out: &mut VjTestResult,
) -> VjStatus {
    let cfg = TuningConfig::from(config);
    let rule = match TestRule::new(kind.into(), level) {
        Ok(r) => r,
        Err(e) => return fail(e),
    };
    match run_test(&series.inner, &rule, &cfg) {
        Ok(report) => {
            *out = VjTestResult {
                statistic: report.statistic,
                standardized: report.standardized,
                critical: report.critical,
                p_value: report.p_value,
                reject: report.reject as i32,
                degenerate: report.degenerate as i32,
                argmax_index: report.argmax_index,
                noise_var_hat: report.noise_var_hat,
            };
            VjStatus::VJ_STATUS_OK
        }
        Err(e) => fail(e),
    }
}

/// Runs the volatility jump test with the given rule and level.
///
/// # Safety
/// `series` must be a live handle; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vj_run_test(
    series: *const VjSeries,
    config: *const VjConfig,
    kind: VjRuleKind,
    level: f64,
    out: *mut VjTestResult,
) -> VjStatus {
    guarded(|| {
        require_nonnull!(series, config, out);
        run_test_impl(&*series, &*config, kind, level, &mut *out)
    })
}

/// Estimates the volatility jump time. With `truncate` nonzero, spot
/// estimates beyond the truncation threshold are zeroed first.
///
/// # Safety
/// `series` must be a live handle; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vj_estimate_changepoint(
    series: *const VjSeries,
    config: *const VjConfig,
    truncate: i32,
    out: *mut VjChangePoint,
) -> VjStatus {
    guarded(|| {
        require_nonnull!(series, config, out);
        let cfg = TuningConfig::from(&*config);
        match estimate_changepoint(&(*series).inner, &cfg, truncate != 0) {
            Ok(est) => {
                *out = VjChangePoint {
                    theta_hat: est.theta_hat,
                    argmax_bin: est.argmax_bin,
                };
                VjStatus::VJ_STATUS_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Estimates the spot volatility and writes the per-bin values to
/// `out_per_bin`, which must hold `config->bins` doubles. The estimated
/// noise variance goes to `out_noise_var` (may be null).
///
/// # Safety
/// `series` must be a live handle; `config` must be valid; `out_per_bin`
/// must point to `config->bins` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn vj_spot_volatility(
    series: *const VjSeries,
    config: *const VjConfig,
    out_per_bin: *mut f64,
    out_noise_var: *mut f64,
) -> VjStatus {
    guarded(|| {
        require_nonnull!(series, config, out_per_bin);
        let cfg = TuningConfig::from(&*config);
        match estimate_spot_vol(&(*series).inner, &cfg) {
            Ok(spot) => {
                std::ptr::copy_nonoverlapping(
                    spot.per_bin.as_ptr(),
                    out_per_bin,
                    spot.per_bin.len(),
                );
                if !out_noise_var.is_null() {
                    *out_noise_var = spot.noise_var_hat;
                }
                VjStatus::VJ_STATUS_OK
            }
            Err(e) => fail(e),
        }
    })
}

/// Runs the bootstrap-calibrated test. `replications` pseudo samples are
/// generated from `seed`; `filter_len` is the smoothing length in bins
/// (pass 0 for the default of 30).
///
/// # Safety
/// `series` must be a live handle; `config` and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn vj_bootstrap_test(
    series: *const VjSeries,
    config: *const VjConfig,
    kind: VjRuleKind,
    level: f64,
    replications: usize,
    filter_len: usize,
    seed: u64,
    out: *mut VjBootstrapResult,
) -> VjStatus {
    guarded(|| {
        require_nonnull!(series, config, out);
        let cfg = TuningConfig::from(&*config);
        let rule = match TestRule::new(kind.into(), level) {
            Ok(r) => r,
            Err(e) => return fail(e),
        };
        let bcfg = BootstrapConfig {
            replications,
            filter_len: if filter_len == 0 { 30 } else { filter_len },
            seed,
            ..BootstrapConfig::default()
        };
        match bootstrap_test(&(*series).inner, &rule, &cfg, &bcfg) {
            Ok(r) => {
                *out = VjBootstrapResult {
                    asymptotic: VjTestResult {
                        statistic: r.asymptotic.statistic,
                        standardized: r.asymptotic.standardized,
                        critical: r.asymptotic.critical,
                        p_value: r.asymptotic.p_value,
                        reject: r.asymptotic.reject as i32,
                        degenerate: r.asymptotic.degenerate as i32,
                        argmax_index: r.asymptotic.argmax_index,
                        noise_var_hat: r.asymptotic.noise_var_hat,
                    },
                    quantile: r.quantile,
                    reject: r.reject as i32,
                    p_value: r.p_value,
                    degenerate_replications: r.degenerate_replications,
                };
                VjStatus::VJ_STATUS_OK
            }
            Err(e) => fail(e),
        }
    })
}
