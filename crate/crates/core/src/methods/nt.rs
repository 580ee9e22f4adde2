use super::Discrepancy;
use crate::error::{Error, Result};
use crate::trial_core::{mean_sd, Group, Method, Subject, TrialState};

fn pooled_sd(weighted_vars: f64, dof: f64) -> f64 {
    if dof > 0.0 {
        (weighted_vars / dof).max(0.0).sqrt()
    } else {
        0.0
    }
}

/// `d_j(k)` for one covariate: how far group `k`'s mean and SD move relative
/// to the grand mean and pooled SD when the subject joins `k`.
fn goodness(own: &[f64], other: &[f64], w: f64) -> f64 {
    let n_own = own.len() as f64;
    let n_other = other.len() as f64;
    let (m_own, s_own) = mean_sd(own);
    let (m_other, s_other) = mean_sd(other);

    let grand_mean = (n_own * m_own + n_other * m_other) / (n_own + n_other);
    let grand_sd = pooled_sd(
        (n_own - 1.0) * s_own * s_own + (n_other - 1.0) * s_other * s_other,
        n_own + n_other - 2.0,
    );

    let mut with_subject = own.to_vec();
    with_subject.push(w);
    let (m_plus, s_plus) = mean_sd(&with_subject);
    let new_grand_mean = ((n_own + 1.0) * m_plus + n_other * m_other) / (n_own + n_other + 1.0);
    let new_grand_sd = pooled_sd(
        n_own * s_plus * s_plus + (n_other - 1.0) * s_other * s_other,
        n_own + n_other - 1.0,
    );

    (m_plus - new_grand_mean).abs() - (m_own - grand_mean).abs() + (s_plus - new_grand_sd).abs()
        - (s_own - grand_sd).abs()
}

/// Nishi-Takaichi discrepancy on the standardized covariates, plus the
/// group-size term `(n1 - n2) / (n1 + n2)`.
pub fn nt_discrepancy(state: &TrialState, subject: &Subject) -> Result<Discrepancy> {
    let (n1, n2) = (state.n1(), state.n2());
    if n1 + n2 == 0 {
        return Err(Error::EmptyTrial);
    }
    if subject.standardized.len() != state.p() {
        return Err(Error::DimensionMismatch {
            expected: state.p(),
            found: subject.standardized.len(),
        });
    }
    let terms = (0..state.p())
        .map(|j| {
            let g1: Vec<f64> = state.members(Group::One).map(|s| s.standardized[j]).collect();
            let g2: Vec<f64> = state.members(Group::Two).map(|s| s.standardized[j]).collect();
            let w = subject.standardized[j];
            goodness(&g1, &g2, w) - goodness(&g2, &g1, w)
        })
        .collect();
    let size_term = (n1 as f64 - n2 as f64) / (n1 + n2) as f64;
    Ok(Discrepancy::from_terms(Method::Nt, terms, size_term))
}
