//! Failure-probability estimation with multilevel Monte Carlo and selective
//! refinement.
//!
//! Given a model that can solve a realization to a certified tolerance,
//! [`driver::run_mlmc_sr`] estimates `p = Pr(X <= y)` to a target
//! root-mean-square error. Samples far from the critical value `y` are left
//! coarse; only those whose error band straddles `y` are refined.
//!
//! ```
//! use mlmc_sr::driver::{run_mlmc_sr, RunOptions};
//! use mlmc_sr::estimator::EstimatorConfig;
//! use mlmc_sr::models::{normal_cdf, SyntheticNormalModel};
//!
//! let model = SyntheticNormalModel::new(0.1, 2.0).unwrap();
//! let config = EstimatorConfig::new(0.8, 0.05, 0.5, 2.0, 10, 1.0).unwrap();
//! let record = run_mlmc_sr(&model, &config, 7, &RunOptions::default()).unwrap();
//! assert!((record.estimate_raw - normal_cdf(0.8)).abs() < 0.2);
//! ```

pub mod driver;
pub mod error;
pub mod estimator;
pub mod harness;
pub mod models;
pub mod par;
pub mod refinement;
pub mod rng;

pub use error::{Error, Result};
