//! Detection and localization of volatility jumps from high-frequency
//! observations under microstructure noise.
//!
//! The pipeline: spectral spot volatility estimation on bins
//! ([`spectral`]), Gumbel-calibrated maximum tests on block differences
//! ([`testing`]), argmax localization of the jump time ([`changepoint`]),
//! a bootstrap alternative to the asymptotic critical values
//! ([`bootstrap`]), and path simulation for Monte Carlo studies ([`sim`]).
//!
//! ```
//! use voljump::{
//!     sim::SimulationSpec, simulate_path, RuleKind, TestRule, TuningConfig,
//! };
//!
//! let path = simulate_path(&SimulationSpec::h0_default(1)).unwrap();
//! let cfg = TuningConfig::default();
//! let rule = TestRule::new(RuleKind::OverlapTrunc, 0.1).unwrap();
//! let report = voljump::run_test(&path.observed, &rule, &cfg).unwrap();
//! assert!(report.p_value >= 0.0 && report.p_value <= 1.0);
//! ```

pub mod bootstrap;
pub mod changepoint;
pub mod config;
pub mod error;
pub mod series;
pub mod sim;
pub mod spectral;
pub mod testing;

pub use bootstrap::{bootstrap_test, BootstrapConfig, BootstrapReport};
pub use changepoint::{estimate_changepoint, ChangePointEstimate};
pub use config::TuningConfig;
pub use error::{Result, VolJumpError};
pub use series::ObservationSeries;
pub use sim::{monte_carlo_study, simulate_path, SimulatedPath, SimulationSpec};
pub use spectral::{estimate_spot_vol, noise_variance_hat, SpotVolSeries};
pub use testing::{run_test, RuleKind, TestReport, TestRule};
