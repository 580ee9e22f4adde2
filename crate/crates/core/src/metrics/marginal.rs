use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trial_core::mean_sd;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateGap {
    pub name: String,
    /// `|mean_1 - mean_2|`; absent while either group is empty.
    pub abs_mean_diff: Option<f64>,
    /// `|sd_1 - sd_2|` with sample SDs (0 for a singleton group).
    pub abs_sd_diff: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalDiffs {
    pub abs_group_size_diff: usize,
    pub covariates: Vec<CovariateGap>,
}

/// Per-covariate absolute mean and SD differences between two groups, plus
/// the absolute group-size difference.
pub fn marginal_diffs<R: AsRef<[f64]>>(names: &[String], group1: &[R], group2: &[R]) -> Result<MarginalDiffs> {
    let p = names.len();
    for r in group1.iter().chain(group2) {
        if r.as_ref().len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: r.as_ref().len(),
            });
        }
    }
    let both = !group1.is_empty() && !group2.is_empty();
    let covariates = names
        .iter()
        .enumerate()
        .map(|(j, name)| {
            let (m1, s1) = mean_sd(&group1.iter().map(|r| r.as_ref()[j]).collect::<Vec<_>>());
            let (m2, s2) = mean_sd(&group2.iter().map(|r| r.as_ref()[j]).collect::<Vec<_>>());
            CovariateGap {
                name: name.clone(),
                abs_mean_diff: both.then(|| (m1 - m2).abs()),
                abs_sd_diff: both.then(|| (s1 - s2).abs()),
            }
        })
        .collect();
    Ok(MarginalDiffs {
        abs_group_size_diff: group1.len().abs_diff(group2.len()),
        covariates,
    })
}
