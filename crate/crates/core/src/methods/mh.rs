use std::f64::consts::PI;

use super::Discrepancy;
use crate::error::{Error, Result};
use crate::trial_core::{Group, Method, Subject, TrialState};

/// Bandwidth for a group of `n` subjects: `n^(-1/5)`.
pub fn bandwidth(n: usize) -> f64 {
    (n as f64).powf(-0.2)
}

pub fn normal_kernel(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * PI).sqrt()
}

/// Gaussian kernel density estimate of `sample` evaluated at `w`.
pub fn kernel_density(sample: &[f64], w: f64) -> f64 {
    let n = sample.len();
    if n == 0 {
        return 0.0;
    }
    let h = bandwidth(n);
    sample.iter().map(|&x| normal_kernel((w - x) / h)).sum::<f64>() / (n as f64 * h)
}

/// Ma-Hu discrepancy: size-weighted difference of the two groups' kernel
/// density estimates at the subject's standardized covariates.
pub fn mh_discrepancy(state: &TrialState, subject: &Subject) -> Result<Discrepancy> {
    let (n1, n2) = (state.n1(), state.n2());
    if n1 == 0 {
        return Err(Error::EmptyGroup(1));
    }
    if n2 == 0 {
        return Err(Error::EmptyGroup(2));
    }
    if subject.standardized.len() != state.p() {
        return Err(Error::DimensionMismatch {
            expected: state.p(),
            found: subject.standardized.len(),
        });
    }
    let n = (n1 + n2) as f64;
    let (w1, w2) = (n1 as f64 / n, n2 as f64 / n);
    let terms = (0..state.p())
        .map(|j| {
            let g1: Vec<f64> = state.members(Group::One).map(|s| s.standardized[j]).collect();
            let g2: Vec<f64> = state.members(Group::Two).map(|s| s.standardized[j]).collect();
            let w = subject.standardized[j];
            w1 * kernel_density(&g1, w) - w2 * kernel_density(&g2, w)
        })
        .collect();
    Ok(Discrepancy::from_terms(Method::Mh, terms, 0.0))
}
