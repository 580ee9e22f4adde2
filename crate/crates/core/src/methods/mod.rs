//! Discrepancy measures and the sequential allocation driver.

mod bkw;
mod discrepancy;
mod driver;
mod mh;
mod nt;
mod ps;

pub use bkw::{bkw_discrepancy, capacity_indicators, draw_gamma, forced_group, BkwCandidate, BkwEvaluation};
pub use discrepancy::Discrepancy;
pub use driver::{
    allocate_from_block, allocate_next, allocate_with_draws, evaluate, initial_state, prepare_subjects, run_subjects,
    run_trial, AllocationRecord, Evaluation, Phase, StepDraws,
};
pub use mh::{bandwidth, kernel_density, mh_discrepancy, normal_kernel};
pub use nt::nt_discrepancy;
pub use ps::ps_discrepancy;
