use serde::{Deserialize, Serialize};

use crate::trial_core::Method;

/// Signed imbalance score for one arriving subject: negative prefers group
/// one, positive prefers group two.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub method: Method,
    pub value: f64,
    /// One term per covariate.
    pub per_covariate: Vec<f64>,
    /// Method-specific term outside the per-covariate sum (NT's group-size term, else 0).
    pub size_term: f64,
}

impl Discrepancy {
    pub(crate) fn from_terms(method: Method, per_covariate: Vec<f64>, size_term: f64) -> Self {
        let value = per_covariate.iter().sum::<f64>() + size_term;
        Self {
            method,
            value,
            per_covariate,
            size_term,
        }
    }
}
