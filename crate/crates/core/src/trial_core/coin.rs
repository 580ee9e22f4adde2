use serde::{Deserialize, Serialize};

use super::rng::RngStream;
use super::state::Group;

/// Probability of assigning group one given discrepancy `d`.
///
/// `p0` when group one is preferred (`d < 0`), `1 - p0` when group two is
/// preferred (`d > 0`), and 1/2 on a tie (including a NaN discrepancy).
pub fn coin_probability(d: f64, p0: f64) -> f64 {
    if d < 0.0 {
        p0
    } else if d > 0.0 {
        1.0 - p0
    } else {
        0.5
    }
}

/// Map a uniform draw on `[0, 1)` to a group.
pub fn resolve_coin(p_group1: f64, uniform: f64) -> Group {
    if uniform < p_group1 {
        Group::One
    } else {
        Group::Two
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoinDecision {
    pub p_group1: f64,
    /// The uniform draw that resolved the coin, kept for audit.
    pub uniform: f64,
    pub group: Group,
}

pub fn biased_coin_decide(d: f64, p0: f64, rng: &mut RngStream) -> CoinDecision {
    let p_group1 = coin_probability(d, p0);
    let uniform = rng.uniform();
    CoinDecision {
        p_group1,
        uniform,
        group: resolve_coin(p_group1, uniform),
    }
}
