//! Covariate-adaptive randomization for small two-arm trials.
//!
//! * [`trial_core`]: covariate preprocessing, trial state, permuted blocks and the biased coin.
//! * [`methods`]: the PS, NT, MH and BKW discrepancy measures and the sequential driver.
//! * [`metrics`]: group-size, marginal, energy-distance and correct-guess metrics.
//! * [`simulator`]: replicated comparisons of methods on a dataset.

pub mod error;
pub mod methods;
pub mod metrics;
pub mod simulator;
pub mod trial_core;

pub use error::{Error, Result};
