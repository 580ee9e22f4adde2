//! Balance and randomness metrics for a completed (or partial) allocation.

mod energy;
mod guess;
mod marginal;

pub use energy::{energy_distance, energy_permutation_test};
pub use guess::correct_guess;
pub use marginal::{marginal_diffs, CovariateGap, MarginalDiffs};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::methods::AllocationRecord;
use crate::trial_core::{standardize, CovariateMatrix, Group, Lane, RngStream};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub n1: usize,
    pub n2: usize,
    pub abs_group_size_diff: usize,
    pub covariates: Vec<CovariateGap>,
    /// Absent until both groups are nonempty.
    pub energy: Option<f64>,
    pub energy_p_value: Option<f64>,
    pub cg_series: Vec<f64>,
    /// Absent when no adaptive step has happened.
    pub mean_cg: Option<f64>,
}

/// Permutation-test settings for [`MetricReport::compute`].
pub struct PermutationSettings<'a> {
    pub replicates: usize,
    pub rng: &'a mut RngStream,
}

impl MetricReport {
    /// Metrics for subjects `rows[i]` allocated to `groups[i]`, in allocation order.
    pub fn compute<R: AsRef<[f64]>>(
        names: &[String],
        rows: &[R],
        groups: &[Group],
        n0: usize,
        permutations: Option<PermutationSettings<'_>>,
    ) -> Result<Self> {
        if rows.len() != groups.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                found: groups.len(),
            });
        }
        let g1: Vec<&[f64]> = rows
            .iter()
            .zip(groups)
            .filter(|(_, g)| **g == Group::One)
            .map(|(r, _)| r.as_ref())
            .collect();
        let g2: Vec<&[f64]> = rows
            .iter()
            .zip(groups)
            .filter(|(_, g)| **g == Group::Two)
            .map(|(r, _)| r.as_ref())
            .collect();
        let marginal = marginal_diffs(names, &g1, &g2)?;
        let both = !g1.is_empty() && !g2.is_empty();
        let energy = if both { Some(energy_distance(&g1, &g2)?) } else { None };
        let energy_p_value = match (both, permutations) {
            (true, Some(s)) => Some(energy_permutation_test(&g1, &g2, s.replicates, s.rng)?),
            _ => None,
        };
        let (cg_series, mean_cg) = correct_guess(groups, n0);
        Ok(Self {
            n1: g1.len(),
            n2: g2.len(),
            abs_group_size_diff: marginal.abs_group_size_diff,
            covariates: marginal.covariates,
            energy,
            energy_p_value,
            cg_series,
            mean_cg,
        })
    }

    /// Metrics for allocation records; `standardized` maps a subject id to its z-values.
    pub fn from_records(
        names: &[String],
        records: &[AllocationRecord],
        standardized: impl Fn(&str) -> Option<Vec<f64>>,
        n0: usize,
    ) -> Result<Self> {
        let rows = records
            .iter()
            .map(|r| {
                standardized(&r.subject_id)
                    .ok_or_else(|| Error::InvalidPlan(format!("unknown subject id {:?}", r.subject_id)))
            })
            .collect::<Result<Vec<_>>>()?;
        let groups: Vec<Group> = records.iter().map(|r| r.group).collect();
        Self::compute(names, &rows, &groups, n0, None)
    }

    /// Metrics for a dataset whose rows are listed in allocation order.
    ///
    /// Covariates are standardized against the whole dataset unless
    /// `raw_scale` is set. The permutation test, when requested, draws from
    /// the permutation lane of `RngStream::new(seed, 0)`.
    pub fn for_dataset(
        matrix: &CovariateMatrix,
        groups: &[Group],
        n0: usize,
        permutations: Option<usize>,
        seed: u64,
        raw_scale: bool,
    ) -> Result<Self> {
        let rows = if raw_scale {
            matrix.to_rows()
        } else {
            standardize(matrix)?.0.to_rows()
        };
        let mut rng = RngStream::new(seed, 0).lane(Lane::Permutation);
        let settings = permutations.map(|replicates| PermutationSettings {
            replicates,
            rng: &mut rng,
        });
        Self::compute(matrix.names(), &rows, groups, n0, settings)
    }
}
