//! Domain types and primitives shared by every allocation method.

mod blocks;
mod coin;
mod config;
mod covariates;
mod linalg;
mod rng;
mod state;

pub use blocks::{block_probabilities, permuted_block_init};
pub use coin::{biased_coin_decide, coin_probability, resolve_coin, CoinDecision};
pub use config::{GammaRange, Method, MethodConfig};
pub use covariates::{
    discretize_quantiles, quantile_sorted, standardize, CovariateMatrix, Discretization, Standardizer,
};
pub use linalg::{empirical_moments, symmetric_sqrt};
pub use rng::{Lane, RngStream, StreamKey};
pub use state::{mean_sd, CategoryCounts, Group, GroupStats, Subject, TrialState};
