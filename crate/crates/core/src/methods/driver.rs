use serde::{Deserialize, Serialize};

use super::bkw::{bkw_discrepancy, draw_gamma, forced_group, BkwEvaluation};
use super::{mh_discrepancy, nt_discrepancy, ps_discrepancy, Discrepancy};
use crate::error::{Error, Result};
use crate::trial_core::{
    block_probabilities, coin_probability, permuted_block_init, resolve_coin, standardize, CovariateMatrix,
    Discretization, Group, Lane, Method, MethodConfig, RngStream, StreamKey, Subject, TrialState,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Evaluation {
    Standard(Discrepancy),
    Bkw(BkwEvaluation),
}

impl Evaluation {
    pub fn value(&self) -> f64 {
        match self {
            Evaluation::Standard(d) => d.value,
            Evaluation::Bkw(b) => b.d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Block,
    Adaptive,
}

/// Random inputs consumed by one adaptive step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDraws {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coin_uniform: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationRecord {
    pub step: usize,
    pub subject_id: String,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
    /// Discrepancy value; absent for block-phase allocations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    pub p_group1: f64,
    pub group: Group,
    /// Assignment dictated by the equal-allocation constraint (BKW only).
    #[serde(default)]
    pub forced: bool,
    #[serde(default)]
    pub draws: StepDraws,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamKey>,
}

/// Discrepancy for the configured method, without any randomness beyond `gamma`.
pub fn evaluate(
    state: &TrialState,
    subject: &Subject,
    config: &MethodConfig,
    gamma: Option<f64>,
) -> Result<Evaluation> {
    match config.method {
        Method::Ps => ps_discrepancy(state, subject).map(Evaluation::Standard),
        Method::Nt => nt_discrepancy(state, subject).map(Evaluation::Standard),
        Method::Mh => mh_discrepancy(state, subject).map(Evaluation::Standard),
        Method::Bkw => {
            let gamma = gamma.ok_or_else(|| Error::config("gamma", "a BKW step needs a drawn gamma"))?;
            bkw_discrepancy(state, subject, config, gamma).map(Evaluation::Bkw)
        }
    }
}

/// Adaptive step with externally supplied draws; replaying recorded draws
/// reproduces the original record exactly.
pub fn allocate_with_draws(
    state: &TrialState,
    subject: Subject,
    config: &MethodConfig,
    draws: StepDraws,
) -> Result<(AllocationRecord, TrialState)> {
    if state.is_full() {
        return Err(Error::TrialFull(state.allocated()));
    }
    let uniform = draws
        .coin_uniform
        .ok_or_else(|| Error::config("coin_uniform", "an adaptive step needs a coin draw"))?;
    let evaluation = evaluate(state, &subject, config, draws.gamma)?;
    let d = evaluation.value();

    let forced = match config.method {
        Method::Bkw => forced_group(state, config.target_n),
        _ => None,
    };
    let (p_group1, group) = match forced {
        Some(g) => (if g == Group::One { 1.0 } else { 0.0 }, g),
        None => {
            let p = coin_probability(d, config.effective_p0());
            (p, resolve_coin(p, uniform))
        }
    };

    let record = AllocationRecord {
        step: state.step(),
        subject_id: subject.id.clone(),
        phase: Phase::Adaptive,
        evaluation: Some(evaluation),
        d: Some(d),
        p_group1,
        group,
        forced: forced.is_some(),
        draws,
        stream: None,
    };
    let next = state.assign(subject, group)?;
    Ok((record, next))
}

/// One adaptive step: draw gamma (BKW) and the coin from `rng`, then allocate.
pub fn allocate_next(
    state: &TrialState,
    subject: Subject,
    config: &MethodConfig,
    rng: &mut RngStream,
) -> Result<(AllocationRecord, TrialState)> {
    if state.step() > config.target_n {
        return Err(Error::TrialFull(state.allocated()));
    }
    let gamma = (config.method == Method::Bkw).then(|| draw_gamma(config, rng));
    let draws = StepDraws {
        gamma,
        coin_uniform: Some(rng.uniform()),
    };
    let (mut record, next) = allocate_with_draws(state, subject, config, draws)?;
    record.stream = Some(rng.key());
    Ok((record, next))
}

/// Block-phase allocation of `subject` to a pre-drawn group.
pub fn allocate_from_block(
    state: &TrialState,
    subject: Subject,
    group: Group,
    p_group1: f64,
) -> Result<(AllocationRecord, TrialState)> {
    let record = AllocationRecord {
        step: state.step(),
        subject_id: subject.id.clone(),
        phase: Phase::Block,
        evaluation: None,
        d: None,
        p_group1,
        group,
        forced: false,
        draws: StepDraws::default(),
        stream: None,
    };
    let next = state.assign(subject, group)?;
    Ok((record, next))
}

/// Empty state shaped for `config` (PS tracks category counts).
pub fn initial_state(p: usize, config: &MethodConfig) -> TrialState {
    match config.method {
        Method::Ps => TrialState::with_categories(p, config.target_n, config.categories),
        _ => TrialState::new(p, config.target_n),
    }
}

/// Standardize the whole dataset and, for PS, discretize each covariate at
/// its quantiles. Subject ids default to the 1-based row number.
pub fn prepare_subjects(
    dataset: &CovariateMatrix,
    ids: Option<&[String]>,
    config: &MethodConfig,
) -> Result<Vec<Subject>> {
    if let Some(ids) = ids {
        if ids.len() != dataset.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: dataset.n_rows(),
                found: ids.len(),
            });
        }
    }
    let (z, _) = standardize(dataset)?;
    let cuts = if config.method == Method::Ps {
        Some(
            (0..z.n_cols())
                .map(|j| Discretization::fit(&z.column(j), config.categories))
                .collect::<Result<Vec<_>>>()?,
        )
    } else {
        None
    };
    Ok((0..dataset.n_rows())
        .map(|i| {
            let id = ids.map_or_else(|| (i + 1).to_string(), |v| v[i].clone());
            let s = Subject::new(id, dataset.row(i).to_vec(), z.row(i).to_vec());
            match &cuts {
                Some(cuts) => {
                    let cats = z.row(i).iter().zip(cuts).map(|(&v, d)| d.category(v)).collect();
                    s.with_categories(cats)
                }
                None => s,
            }
        })
        .collect())
}

/// Allocate prepared subjects in the given order: permuted blocks for the
/// first `n0`, then adaptive steps.
pub fn run_subjects(subjects: Vec<Subject>, config: &MethodConfig, rng: &RngStream) -> Result<Vec<AllocationRecord>> {
    config.validate_for_run()?;
    if subjects.len() != config.target_n {
        return Err(Error::DimensionMismatch {
            expected: config.target_n,
            found: subjects.len(),
        });
    }
    let p = subjects.first().map_or(0, Subject::p);
    let blocks = permuted_block_init(config.n0, config.block_size, &mut rng.lane(Lane::Blocks))?;
    let block_p = block_probabilities(&blocks, config.block_size);
    let mut coins = rng.lane(Lane::Allocation);

    let mut state = initial_state(p, config);
    let mut records = Vec::with_capacity(subjects.len());
    for (i, subject) in subjects.into_iter().enumerate() {
        let (record, next) = if i < blocks.len() {
            allocate_from_block(&state, subject, blocks[i], block_p[i])?
        } else {
            allocate_next(&state, subject, config, &mut coins)?
        };
        records.push(record);
        state = next;
    }
    Ok(records)
}

/// Full sequential trial on a raw dataset. `arrival_order` is a permutation
/// of the row indices `0..N`.
pub fn run_trial(
    dataset: &CovariateMatrix,
    arrival_order: &[usize],
    config: &MethodConfig,
    rng: &RngStream,
) -> Result<Vec<AllocationRecord>> {
    let n = dataset.n_rows();
    if n != config.target_n {
        return Err(Error::DimensionMismatch {
            expected: config.target_n,
            found: n,
        });
    }
    check_permutation(arrival_order, n)?;
    let subjects = prepare_subjects(dataset, None, config)?;
    let ordered = arrival_order.iter().map(|&i| subjects[i].clone()).collect();
    run_subjects(ordered, config, rng)
}

pub(crate) fn check_permutation(order: &[usize], n: usize) -> Result<()> {
    let mut seen = vec![false; n];
    if order.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: order.len(),
        });
    }
    for &i in order {
        if i >= n || seen[i] {
            return Err(Error::InvalidPlan(format!(
                "arrival order is not a permutation of 0..{n}"
            )));
        }
        seen[i] = true;
    }
    Ok(())
}
