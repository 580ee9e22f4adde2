use super::Discrepancy;
use crate::error::{Error, Result};
use crate::trial_core::{CategoryCounts, Group, Method, Subject, TrialState};

/// Pocock-Simon discrepancy: for each covariate, the change in the count gap
/// within the subject's category from joining group one instead of group two.
pub fn ps_discrepancy(state: &TrialState, subject: &Subject) -> Result<Discrepancy> {
    let cats = subject
        .categories
        .as_ref()
        .ok_or_else(|| Error::MissingCategories(subject.id.clone()))?;
    if cats.len() != state.p() {
        return Err(Error::DimensionMismatch {
            expected: state.p(),
            found: cats.len(),
        });
    }

    let rebuilt;
    let counts = match state.category_counts() {
        Some(c) => c,
        None => {
            rebuilt = counts_from_members(state, cats)?;
            &rebuilt
        }
    };
    if cats.iter().any(|&l| l < 1 || l as usize > counts.n_categories()) {
        return Err(Error::InvalidMatrix(format!(
            "subject {} has a category outside 1..={}",
            subject.id,
            counts.n_categories()
        )));
    }

    let terms = cats
        .iter()
        .enumerate()
        .map(|(j, &level)| {
            let a = i64::from(counts.get(j, level, Group::One));
            let b = i64::from(counts.get(j, level, Group::Two));
            ((a + 1 - b).abs() - (a - (b + 1)).abs()) as f64
        })
        .collect();
    Ok(Discrepancy::from_terms(Method::Ps, terms, 0.0))
}

fn counts_from_members(state: &TrialState, subject_cats: &[u32]) -> Result<CategoryCounts> {
    let mut c = subject_cats.iter().copied().max().unwrap_or(1) as usize;
    for (s, _) in state.assignments() {
        let cats = s
            .categories
            .as_ref()
            .ok_or_else(|| Error::MissingCategories(s.id.clone()))?;
        c = c.max(cats.iter().copied().max().unwrap_or(1) as usize);
    }
    let mut counts = CategoryCounts::new(state.p(), c);
    for (s, g) in state.assignments() {
        counts.add(s.categories.as_deref().unwrap_or_default(), *g);
    }
    Ok(counts)
}
