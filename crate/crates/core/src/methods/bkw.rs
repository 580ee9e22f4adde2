//! Closed-form robust mean/variance discrepancy.
//!
//! Future subjects are modelled as `w_bar + Sigma^{1/2} eps` with the
//! perturbations bounded in Frobenius norm by `gamma * sqrt((N - t) p)`. The
//! worst case over that set reduces, for each candidate assignment of the
//! arriving subject, to an explicit mean-gap term `W'_j` and a variance-gap
//! term `V_j`, so the robust program only needs both candidates evaluated.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial_core::{empirical_moments, symmetric_sqrt, Group, MethodConfig, RngStream, Subject, TrialState};

/// Mean and variance-gap terms for one hypothetical assignment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkwCandidate {
    pub group: Group,
    pub w_prime: Vec<f64>,
    pub v: Vec<f64>,
    pub d_b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BkwEvaluation {
    pub gamma: f64,
    /// 1-based index of the arriving subject.
    pub t: usize,
    pub group1: BkwCandidate,
    pub group2: BkwCandidate,
    /// `D_B(group one) - D_B(group two)`.
    pub d: f64,
}

impl BkwEvaluation {
    pub fn candidate(&self, g: Group) -> &BkwCandidate {
        match g {
            Group::One => &self.group1,
            Group::Two => &self.group2,
        }
    }
}

/// Whether each group can still receive future subjects after the arriving
/// subject joins `candidate`: `I(N/2 - n_k' - 1 >= 0)` where `n_k'` is group
/// `k`'s size including the candidate assignment.
pub fn capacity_indicators(n1: usize, n2: usize, candidate: Group, target_n: usize) -> (bool, bool) {
    let half = (target_n / 2) as i64;
    let x = i64::from(candidate.indicator());
    let room1 = half - n1 as i64 - x - 1 >= 0;
    let room2 = half - n2 as i64 - (1 - x) - 1 >= 0;
    (room1, room2)
}

/// Uniform draw of the uncertainty parameter from the configured range.
pub fn draw_gamma(config: &MethodConfig, rng: &mut RngStream) -> f64 {
    rng.uniform_in(config.gamma_range.lo, config.gamma_range.hi)
}

/// Evaluate both candidate assignments of `subject` with a fixed `gamma`.
///
/// The moments are taken over the `t - 1` allocated subjects plus the
/// arriving one, all on the standardized scale.
pub fn bkw_discrepancy(
    state: &TrialState,
    subject: &Subject,
    config: &MethodConfig,
    gamma: f64,
) -> Result<BkwEvaluation> {
    let n = config.target_n;
    if n % 2 != 0 {
        return Err(Error::OddTargetN(n));
    }
    let range = config.gamma_range;
    if !range.contains(gamma) {
        return Err(Error::GammaOutOfRange {
            gamma,
            lo: range.lo,
            hi: range.hi,
        });
    }
    let p = state.p();
    if subject.standardized.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            found: subject.standardized.len(),
        });
    }
    let t = state.step();
    if t > n {
        return Err(Error::TrialFull(state.allocated()));
    }

    let prior: Vec<(&[f64], f64)> = state
        .assignments()
        .iter()
        .map(|(s, g)| (s.standardized.as_slice(), if *g == Group::One { 1.0 } else { -1.0 }))
        .collect();
    let rows = prior
        .iter()
        .map(|(w, _)| *w)
        .chain(std::iter::once(subject.standardized.as_slice()));
    let (mean, cov) = empirical_moments(rows, p);
    let root = symmetric_sqrt(&cov)?;
    let row_norms: Vec<f64> = (0..p).map(|j| root.row(j).norm()).collect();

    let remaining = (n - t) as f64;
    let scale = 2.0 / n as f64;
    let p_f = p as f64;

    let evaluate = |candidate: Group| -> BkwCandidate {
        let sign_t = if candidate == Group::One { 1.0 } else { -1.0 };
        let (room1, room2) = capacity_indicators(state.n1(), state.n2(), candidate, n);
        let mut w_prime = Vec::with_capacity(p);
        let mut v = Vec::with_capacity(p);
        for j in 0..p {
            let centre = mean[j];
            let mut mean_gap = 0.0;
            let mut var_gap = 0.0;
            for (w, sign) in &prior {
                let dev = w[j] - centre;
                mean_gap += dev * sign;
                var_gap += dev * dev * sign;
            }
            let dev_t = subject.standardized[j] - centre;
            mean_gap += dev_t * sign_t;
            var_gap += dev_t * dev_t * sign_t;

            let norm = row_norms[j];
            w_prime.push(scale * (mean_gap.abs() + gamma * norm * remaining * p_f.sqrt()));

            let spread = gamma * gamma * remaining * p_f * norm * norm;
            let up = var_gap + if room1 { spread } else { 0.0 };
            let down = -var_gap + if room2 { spread } else { 0.0 };
            let vj = scale * up.max(down);
            debug_assert!(vj >= 0.0);
            v.push(vj);
        }
        let d_b = w_prime.iter().sum::<f64>() + config.rho * v.iter().map(|x| x.sqrt()).sum::<f64>();
        BkwCandidate {
            group: candidate,
            w_prime,
            v,
            d_b,
        }
    };

    let group1 = evaluate(Group::One);
    let group2 = evaluate(Group::Two);
    let d = group1.d_b - group2.d_b;
    Ok(BkwEvaluation {
        gamma,
        t,
        group1,
        group2,
        d,
    })
}

/// Group forced by the equal-allocation constraint, if one group is already full.
pub fn forced_group(state: &TrialState, target_n: usize) -> Option<Group> {
    let half = target_n / 2;
    if state.n1() >= half {
        Some(Group::Two)
    } else if state.n2() >= half {
        Some(Group::One)
    } else {
        None
    }
}
