//! Simulation of noisy Itô semimartingale paths for Monte Carlo studies:
//! Euler-Maruyama discretization of a semimartingale volatility process
//! around a seasonality curve, optional volatility jump, compound price
//! jumps, and additive Gaussian microstructure noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::changepoint::estimate_from_per_bin;
use crate::config::TuningConfig;
use crate::error::{Result, VolJumpError};
use crate::series::ObservationSeries;
use crate::spectral::estimate_spot_vol;
use crate::testing::{run_test_on_spot, RuleKind, TestReport, TestRule};

/// Intraday seasonality curve `v_t = 1 - 0.2 sin(3πt/4)`.
pub fn seasonality(t: f64) -> f64 {
    1.0 - 0.2 * (0.75 * std::f64::consts::PI * t).sin()
}

/// Volatility process driving the simulated price path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "model")]
pub enum VolModel {
    /// Constant squared volatility.
    Constant { sigma_sq: f64 },
    /// Semimartingale volatility
    /// `σ_t = (level + ∫ cρ dW + ∫ c√(1-ρ²) dW⊥) · v_t`, correlated with
    /// the price driver through `rho`. With `seasonal` off, `v_t ≡ 1`.
    /// The default `level = 1` makes σ fluctuate around the seasonality
    /// curve so that sign changes are rare at small `c`; `level = 0` starts
    /// the martingale factor at zero, which keeps σ near zero early on and
    /// makes the rescaled test statistics degenerate there.
    Semimartingale {
        c: f64,
        rho: f64,
        seasonal: bool,
        level: f64,
    },
}

impl Default for VolModel {
    fn default() -> Self {
        VolModel::Semimartingale {
            c: 0.1,
            rho: 0.5,
            seasonal: true,
            level: 1.0,
        }
    }
}

/// Jump time specification for a single price jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "at")]
pub enum JumpTime {
    Fixed { t: f64 },
    /// Drawn uniformly on (0, 1).
    Uniform,
    /// At the volatility jump time (requires `vol_jump`).
    AtTheta,
}

/// Jump size law for a single price jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "law")]
pub enum JumpSize {
    Normal { mean: f64, var: f64 },
    /// Uniform on [-1,-0.2] ∪ [0.2,1], the normalized density of the
    /// compound-Poisson compensator.
    NuUniform,
}

/// One scheduled price jump.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PriceJump {
    pub time: JumpTime,
    pub size: JumpSize,
}

/// Volatility jump under the alternative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolJump {
    /// Jump size `Δσ²`, added to the squared volatility from θ onward.
    pub delta: f64,
    /// Jump time; `None` draws θ uniformly on `(theta_lo, theta_hi)`.
    pub theta: Option<f64>,
    /// Lower bound of the uniform θ draw (defaults to `α_n h`).
    #[serde(default = "default_theta_lo")]
    pub theta_lo: f64,
    /// Upper bound of the uniform θ draw (defaults to `1 - α_n h`).
    #[serde(default = "default_theta_hi")]
    pub theta_hi: f64,
}

fn default_theta_lo() -> f64 {
    0.125
}

fn default_theta_hi() -> f64 {
    0.875
}

/// Full data-generating configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSpec {
    pub n: usize,
    pub x0: f64,
    /// Constant drift.
    pub drift: f64,
    /// Noise standard deviation η.
    pub noise_std: f64,
    pub vol_model: VolModel,
    pub vol_jump: Option<VolJump>,
    /// Scheduled price jumps.
    #[serde(default)]
    pub price_jumps: Vec<PriceJump>,
    /// Compound-Poisson price jumps: rate 1, sizes uniform on
    /// [-1,-0.2] ∪ [0.2,1].
    #[serde(default)]
    pub compensator_jumps: bool,
    pub seed: u64,
}

impl Default for SimulationSpec {
    fn default() -> Self {
        Self {
            n: 30_000,
            x0: 4.0,
            drift: 0.1,
            noise_std: 0.005,
            vol_model: VolModel::default(),
            vol_jump: None,
            price_jumps: Vec::new(),
            compensator_jumps: false,
            seed: 0,
        }
    }
}

impl SimulationSpec {
    /// Null-hypothesis setup of the skip-sampling comparison study: one
    /// price jump at a uniform time with N(0.5, 0.1) size, no volatility
    /// jump.
    pub fn h0_default(seed: u64) -> Self {
        Self {
            price_jumps: vec![PriceJump {
                time: JumpTime::Uniform,
                size: JumpSize::Normal {
                    mean: 0.5,
                    var: 0.1,
                },
            }],
            seed,
            ..Self::default()
        }
    }

    /// Alternative setup: volatility jump Δσ² = 0.2 at θ = 2/3 with a
    /// common price jump at θ, plus the uniform-time price jump of the
    /// null setup.
    pub fn h1_default(seed: u64) -> Self {
        Self {
            vol_jump: Some(VolJump {
                delta: 0.2,
                theta: Some(2.0 / 3.0),
                theta_lo: default_theta_lo(),
                theta_hi: default_theta_hi(),
            }),
            price_jumps: vec![
                PriceJump {
                    time: JumpTime::AtTheta,
                    size: JumpSize::Normal {
                        mean: 0.5,
                        var: 0.1,
                    },
                },
                PriceJump {
                    time: JumpTime::Uniform,
                    size: JumpSize::Normal {
                        mean: 0.5,
                        var: 0.1,
                    },
                },
            ],
            seed,
            ..Self::default()
        }
    }

    /// Null-hypothesis setup with compound-Poisson price jumps.
    pub fn h0_compensator(seed: u64) -> Self {
        Self {
            compensator_jumps: true,
            seed,
            ..Self::default()
        }
    }

    /// Alternative with compound-Poisson price jumps, a volatility jump of
    /// size `delta` at a uniform θ, and a common price jump at θ.
    pub fn h1_compensator(delta: f64, seed: u64) -> Self {
        Self {
            vol_jump: Some(VolJump {
                delta,
                theta: None,
                theta_lo: default_theta_lo(),
                theta_hi: default_theta_hi(),
            }),
            price_jumps: vec![PriceJump {
                time: JumpTime::AtTheta,
                size: JumpSize::NuUniform,
            }],
            compensator_jumps: true,
            seed,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(VolJumpError::parameter("n must be positive"));
        }
        if !(self.noise_std >= 0.0) {
            return Err(VolJumpError::parameter("noise_std must be nonnegative"));
        }
        if let Some(vj) = &self.vol_jump {
            if vj.delta == 0.0 {
                return Err(VolJumpError::parameter("vol_jump.delta must be nonzero"));
            }
            if let Some(theta) = vj.theta {
                if !(theta > 0.0 && theta < 1.0) {
                    return Err(VolJumpError::parameter("vol_jump.theta must lie in (0,1)"));
                }
            } else if !(vj.theta_lo < vj.theta_hi && vj.theta_lo > 0.0 && vj.theta_hi < 1.0) {
                return Err(VolJumpError::parameter("invalid vol_jump theta bounds"));
            }
        }
        let needs_theta = self
            .price_jumps
            .iter()
            .any(|j| matches!(j.time, JumpTime::AtTheta));
        if needs_theta && self.vol_jump.is_none() {
            return Err(VolJumpError::parameter(
                "price jump at-theta requires a vol_jump",
            ));
        }
        Ok(())
    }
}

/// One simulated path with its ground truth.
#[derive(Debug, Clone)]
pub struct SimulatedPath {
    /// Noisy observations `Y = X + η E`.
    pub observed: ObservationSeries,
    /// Latent semimartingale `X` (continuous part plus price jumps).
    pub latent: ObservationSeries,
    /// Continuous part only (no price jumps); `latent_continuous + noise`
    /// is the jump-free comparator series.
    pub latent_continuous: ObservationSeries,
    /// Jump-free comparator observations (continuous part plus the same
    /// noise draw).
    pub observed_continuous: ObservationSeries,
    /// True squared volatility `σ²_{i/n}`, `i = 0..=n`, including the
    /// volatility jump.
    pub true_vol: Vec<f64>,
    /// Volatility jump time, when present.
    pub true_theta: Option<f64>,
}

fn draw_nu_uniform(rng: &mut impl Rng) -> f64 {
    // uniform on [-1,-0.2] ∪ [0.2,1]
    let u: f64 = rng.gen_range(0.0..1.6);
    if u < 0.8 {
        -1.0 + u
    } else {
        0.2 + (u - 0.8)
    }
}

/// Euler-Maruyama simulation of the observation model. The noise draws use
/// an RNG stream separate from the path draws, so the noise is independent
/// of `X` by construction.
pub fn simulate_path(spec: &SimulationSpec) -> Result<SimulatedPath> {
    spec.validate()?;
    let n = spec.n;
    let nf = n as f64;
    let dt = 1.0 / nf;
    let mut path_rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut noise_rng = ChaCha8Rng::seed_from_u64(spec.seed ^ 0x9e37_79b9_7f4a_7c15);

    // resolve the volatility jump time first so scheduled jumps can refer to it
    let theta = match &spec.vol_jump {
        Some(vj) => Some(match vj.theta {
            Some(t) => t,
            None => path_rng.gen_range(vj.theta_lo..vj.theta_hi),
        }),
        None => None,
    };
    let delta = spec.vol_jump.map(|vj| vj.delta).unwrap_or(0.0);

    // price jump schedule: (time, size)
    let mut jumps: Vec<(f64, f64)> = Vec::new();
    for j in &spec.price_jumps {
        let t = match j.time {
            JumpTime::Fixed { t } => t,
            JumpTime::Uniform => path_rng.gen_range(0.0..1.0),
            JumpTime::AtTheta => theta.expect("validated"),
        };
        let size = match j.size {
            JumpSize::Normal { mean, var } => {
                mean + var.sqrt() * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut path_rng)
            }
            JumpSize::NuUniform => draw_nu_uniform(&mut path_rng),
        };
        jumps.push((t, size));
    }
    if spec.compensator_jumps {
        // Poisson(1) arrivals, sizes from the normalized compensator density
        let mut t = 0.0f64;
        loop {
            let u: f64 = path_rng.gen_range(f64::MIN_POSITIVE..1.0);
            t -= u.ln();
            if t >= 1.0 {
                break;
            }
            jumps.push((t, draw_nu_uniform(&mut path_rng)));
        }
    }

    // volatility factor Euler scheme on the observation grid
    let mut true_vol = Vec::with_capacity(n + 1);
    let mut cont = Vec::with_capacity(n + 1);
    let mut cum_jump = Vec::with_capacity(n + 1);
    let sqrt_dt = dt.sqrt();
    match spec.vol_model {
        VolModel::Constant { sigma_sq } => {
            let mut x = spec.x0;
            cont.push(x);
            for i in 0..n {
                let t_i = i as f64 * dt;
                let s2 = sigma_sq + if theta.map_or(false, |th| t_i >= th) { delta } else { 0.0 };
                true_vol.push(s2);
                let dw: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut path_rng);
                x += spec.drift * dt + s2.max(0.0).sqrt() * sqrt_dt * dw;
                cont.push(x);
            }
            let s2_end = sigma_sq + if theta.map_or(false, |th| 1.0 >= th) { delta } else { 0.0 };
            true_vol.push(s2_end);
        }
        VolModel::Semimartingale {
            c,
            rho,
            seasonal,
            level,
        } => {
            let mut x = spec.x0;
            let mut factor = level; // level + ∫ cρ dW + ∫ c√(1-ρ²) dW⊥
            cont.push(x);
            let ortho = (1.0 - rho * rho).max(0.0).sqrt();
            let mut sign_flips = 0usize;
            for i in 0..n {
                let t_i = i as f64 * dt;
                let season = if seasonal { seasonality(t_i) } else { 1.0 };
                // the diffusion coefficient is |σ_t| = √(σ²_t); record sign
                // changes of the factor, which are rare at small c
                let sigma = factor * season;
                if sigma < 0.0 {
                    sign_flips += 1;
                }
                let s2 = sigma * sigma + if theta.map_or(false, |th| t_i >= th) { delta } else { 0.0 };
                true_vol.push(s2);
                let dw: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut path_rng);
                let dw_perp: f64 = <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut path_rng);
                x += spec.drift * dt + s2.max(0.0).sqrt() * sqrt_dt * dw;
                factor += c * rho * sqrt_dt * dw + c * ortho * sqrt_dt * dw_perp;
                cont.push(x);
            }
            if sign_flips > 0 {
                log::debug!(
                    "volatility factor was negative on {sign_flips} of {n} steps"
                );
            }
            let season = if seasonal { seasonality(1.0) } else { 1.0 };
            let sigma = factor * season;
            let s2_end = sigma * sigma + if theta.map_or(false, |th| 1.0 >= th) { delta } else { 0.0 };
            true_vol.push(s2_end);
        }
    }

    // cumulative price-jump process on the grid: jump at time t lands in the
    // first grid point i/n >= t
    jumps.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    let mut acc = 0.0;
    let mut jump_iter = jumps.iter().peekable();
    for i in 0..=n {
        let t_i = i as f64 * dt;
        while let Some(&&(t, size)) = jump_iter.peek() {
            if t <= t_i {
                acc += size;
                jump_iter.next();
            } else {
                break;
            }
        }
        cum_jump.push(acc);
    }

    let latent: Vec<f64> = cont.iter().zip(&cum_jump).map(|(c, j)| c + j).collect();
    let noise: Vec<f64> = (0..=n)
        .map(|_| spec.noise_std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut noise_rng))
        .collect();
    let observed: Vec<f64> = latent.iter().zip(&noise).map(|(x, e)| x + e).collect();
    let observed_cont: Vec<f64> = cont.iter().zip(&noise).map(|(x, e)| x + e).collect();

    Ok(SimulatedPath {
        observed: ObservationSeries::new(observed)?,
        latent: ObservationSeries::new(latent)?,
        latent_continuous: ObservationSeries::new(cont.clone())?,
        observed_continuous: ObservationSeries::new(observed_cont)?,
        true_vol,
        true_theta: theta,
    })
}

/// Summary of one (spec, rule) cell of a Monte Carlo study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudyCell {
    pub label: String,
    pub rule: TestRule,
    pub reps: usize,
    pub rejection_rate: f64,
    pub mean_standardized: f64,
    /// Empirical deciles (10%..90%) of the standardized statistic.
    pub standardized_deciles: Vec<f64>,
    /// Quartiles of |θ̂ - θ| over runs with a true volatility jump; empty
    /// otherwise.
    pub localization_error_quartiles: Vec<f64>,
}

/// One labeled simulation scenario of a study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StudySpec {
    pub label: String,
    pub spec: SimulationSpec,
}

/// Deterministic seed stream for replication `rep` under `master` seed.
pub fn derive_seed(master: u64, rep: u64) -> u64 {
    // splitmix64 step
    let mut z = master
        .wrapping_add(rep.wrapping_mul(0x9e37_79b9_7f4a_7c15))
        .wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx]
}

/// Runs `reps` replications per scenario and rule. Replications run in
/// parallel with per-replication derived seeds, so the outcome is
/// independent of scheduling.
pub fn monte_carlo_study(
    specs: &[StudySpec],
    rules: &[TestRule],
    reps: usize,
    master_seed: u64,
) -> Result<Vec<StudyCell>> {
    if reps == 0 {
        return Err(VolJumpError::parameter("reps must be >= 1"));
    }
    let cfg = TuningConfig::default();
    let mut cells = Vec::new();
    for (spec_idx, sspec) in specs.iter().enumerate() {
        let runs: Vec<(Vec<TestReport>, Option<f64>)> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let mut spec = sspec.spec.clone();
                spec.seed = derive_seed(master_seed, (spec_idx * reps + rep) as u64);
                let path = simulate_path(&spec)?;
                let spot = estimate_spot_vol(&path.observed, &cfg)?;
                let reports = rules
                    .iter()
                    .map(|rule| run_test_on_spot(&spot, rule, &cfg))
                    .collect::<Result<Vec<_>>>()?;
                let loc_err = match path.true_theta {
                    Some(theta) => {
                        let est = estimate_from_per_bin(&spot.per_bin, &cfg)?;
                        Some((est.theta_hat - theta).abs())
                    }
                    None => None,
                };
                Ok((reports, loc_err))
            })
            .collect::<Result<Vec<_>>>()?;
        for (rule_idx, rule) in rules.iter().enumerate() {
            let stats: Vec<&TestReport> = runs.iter().map(|r| &r.0[rule_idx]).collect();
            let rejections = stats.iter().filter(|r| r.reject).count();
            let mut standardized: Vec<f64> =
                stats.iter().map(|r| r.standardized).collect();
            standardized.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let deciles = (1..=9)
                .map(|d| quantile_sorted(&standardized, d as f64 / 10.0))
                .collect();
            let mean = standardized.iter().sum::<f64>() / reps as f64;
            let mut loc: Vec<f64> = runs.iter().filter_map(|r| r.1).collect();
            loc.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let loc_quartiles = if loc.is_empty() {
                Vec::new()
            } else {
                vec![
                    quantile_sorted(&loc, 0.25),
                    quantile_sorted(&loc, 0.5),
                    quantile_sorted(&loc, 0.75),
                ]
            };
            cells.push(StudyCell {
                label: sspec.label.clone(),
                rule: *rule,
                reps,
                rejection_rate: rejections as f64 / reps as f64,
                mean_standardized: mean,
                standardized_deciles: deciles,
                localization_error_quartiles: loc_quartiles,
            });
        }
    }
    Ok(cells)
}

/// Convenience: the four rule kinds at one level.
pub fn all_rules(level: f64) -> Result<Vec<TestRule>> {
    Ok(vec![
        TestRule::new(RuleKind::NonOverlap, level)?,
        TestRule::new(RuleKind::Overlap, level)?,
        TestRule::new(RuleKind::NonOverlapTrunc, level)?,
        TestRule::new(RuleKind::OverlapTrunc, level)?,
    ])
}
