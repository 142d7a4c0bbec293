#ifndef VOLJUMP_H
#define VOLJUMP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Statistic variants, matching the library's rule kinds.
typedef enum VjRuleKind {
  VJ_RULE_NON_OVERLAP = 0,
  VJ_RULE_OVERLAP = 1,
  VJ_RULE_NON_OVERLAP_TRUNC = 2,
  VJ_RULE_OVERLAP_TRUNC = 3,
} VjRuleKind;

// Status codes returned by every fallible function.
typedef enum VjStatus {
  // Success.
  VJ_STATUS_OK = 0,
  // A parameter was out of range or inconsistent.
  VJ_STATUS_PARAMETER = 1,
  // The input data was malformed.
  VJ_STATUS_FORMAT = 2,
  // A required pointer argument was null.
  VJ_STATUS_NULL_POINTER = 3,
  // An internal invariant failed.
  VJ_STATUS_INTERNAL = 4,
} VjStatus;

// Opaque observation series handle.
typedef struct VjSeries VjSeries;

// Tuning parameters. Initialize with [`vj_config_default`] and override
// fields as needed. `noise_variance` is only honored when
// `has_noise_variance` is nonzero.
typedef struct VjConfig {
  size_t bins;
  size_t block_len;
  double tau;
  double regularity;
  size_t pilot_freqs;
  size_t cutoff;
  int32_t has_noise_variance;
  double noise_variance;
  int32_t use_known_eta_in_stat;
} VjConfig;

// Test outcome.
typedef struct VjTestResult {
  // Raw maximum statistic.
  double statistic;
  // Statistic after the rule's limit-theorem standardization.
  double standardized;
  // Rejection threshold for the raw statistic.
  double critical;
  double p_value;
  // 1 when the null of no volatility jump is rejected.
  int32_t reject;
  // 1 when a vanishing denominator made the statistic infinite.
  int32_t degenerate;
  // Block index attaining the maximum.
  size_t argmax_index;
  // Estimated noise variance.
  double noise_var_hat;
} VjTestResult;

// Change-point estimate.
typedef struct VjChangePoint {
  // Estimated jump time in (0, 1).
  double theta_hat;
  // Bin index attaining the maximum.
  size_t argmax_bin;
} VjChangePoint;

// Bootstrap-calibrated test outcome.
typedef struct VjBootstrapResult {
  // Outcome of the asymptotic rule on the original data.
  struct VjTestResult asymptotic;
  // Bootstrap critical value for the raw statistic.
  double quantile;
  // 1 when the bootstrap rule rejects.
  int32_t reject;
  // Fraction of pseudo statistics at or above the original one.
  double p_value;
  // Pseudo samples with a degenerate statistic.
  size_t degenerate_replications;
} VjBootstrapResult;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the calling thread's last error message into `buf` (NUL-terminated,
// truncated to `len` bytes) and returns the full message length in bytes,
// excluding the terminator. `buf` may be null to query the length.
size_t vj_last_error_message(char *buf, size_t len);

// Creates a series from `len` observation values (the path sampled at
// `len - 1 + 1` grid points; at least 2 finite values). On success writes
// an owned handle to `out`.
//
// # Safety
// `values` must point to `len` readable doubles; `out` must be writable.
enum VjStatus vj_series_new(const double *values, size_t len, struct VjSeries **out);

// Frees a series handle. Null is a no-op.
//
// # Safety
// `series` must be a handle from [`vj_series_new`], not yet freed.
void vj_series_free(struct VjSeries *series);

// Number of increments `n` of the series (one less than the value count).
//
// # Safety
// `series` must be a live handle; `out` must be writable.
enum VjStatus vj_series_len(const struct VjSeries *series, size_t *out);

// Writes the default tuning configuration to `out`.
//
// # Safety
// `out` must be writable.
enum VjStatus vj_config_default(struct VjConfig *out);

// Runs the volatility jump test with the given rule and level.
//
// # Safety
// `series` must be a live handle; `config` and `out` must be valid.
enum VjStatus vj_run_test(const struct VjSeries *series,
                          const struct VjConfig *config,
                          enum VjRuleKind kind,
                          double level,
                          struct VjTestResult *out);

// Estimates the volatility jump time. With `truncate` nonzero, spot
// estimates beyond the truncation threshold are zeroed first.
//
// # Safety
// `series` must be a live handle; `config` and `out` must be valid.
enum VjStatus vj_estimate_changepoint(const struct VjSeries *series,
                                      const struct VjConfig *config,
                                      int32_t truncate,
                                      struct VjChangePoint *out);

// Estimates the spot volatility and writes the per-bin values to
// `out_per_bin`, which must hold `config->bins` doubles. The estimated
// noise variance goes to `out_noise_var` (may be null).
//
// # Safety
// `series` must be a live handle; `config` must be valid; `out_per_bin`
// must point to `config->bins` writable doubles.
enum VjStatus vj_spot_volatility(const struct VjSeries *series,
                                 const struct VjConfig *config,
                                 double *out_per_bin,
                                 double *out_noise_var);

// Runs the bootstrap-calibrated test. `replications` pseudo samples are
// generated from `seed`; `filter_len` is the smoothing length in bins
// (pass 0 for the default of 30).
//
// # Safety
// `series` must be a live handle; `config` and `out` must be valid.
enum VjStatus vj_bootstrap_test(const struct VjSeries *series,
                                const struct VjConfig *config,
                                enum VjRuleKind kind,
                                double level,
                                size_t replications,
                                size_t filter_len,
                                uint64_t seed,
                                struct VjBootstrapResult *out);

#ifdef __cplusplus
} // extern "C"
#endif // __cplusplus

#endif /* VOLJUMP_H */
