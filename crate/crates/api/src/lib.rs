//! Request and response bodies of the allocation service, version
//! [`SCHEMA_VERSION`]. Every field name here is part of the public wire
//! format; changes require a schema version bump.

use serde::{Deserialize, Serialize};

use covbal_core::methods::{AllocationRecord, Evaluation, Phase, StepDraws};
use covbal_core::metrics::MetricReport;
use covbal_core::simulator::{ReplicateRecord, SummaryDocument};
use covbal_core::trial_core::{Group, MethodConfig, StreamKey};

pub const SCHEMA_VERSION: u32 = 1;

/// How a live trial maps raw covariates onto the working z-scale.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardization {
    /// Re-fit on all enrolled subjects (plus the arriving one) at every enrollment.
    #[default]
    Continuous,
    /// Fit once on the permuted-block cohort and keep those statistics.
    FreezeAfterBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateTrialRequest {
    pub config: MethodConfig,
    pub covariate_names: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub standardization: Standardization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateTrialResponse {
    pub schema_version: u32,
    pub id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollRequest {
    /// Defaults to the enrollment sequence number.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    pub covariates: Vec<f64>,
}

/// One acknowledged enrollment, as stored in the trial's event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollmentEvent {
    pub seq: usize,
    /// RFC 3339 UTC time the event was committed.
    pub timestamp: String,
    pub subject_id: String,
    pub raw: Vec<f64>,
    pub group: Group,
    pub p_group1: f64,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    #[serde(default)]
    pub forced: bool,
    /// Random inputs of an adaptive step (gamma for BKW, the coin uniform).
    #[serde(default)]
    pub draws: StepDraws,
    /// Generator the draws came from; absent for block-phase events, whose
    /// assignment is fixed by the header's block sequence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamKey>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<Evaluation>,
}

/// First line of a trial's event log. Every later line is an [`EnrollmentEvent`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialHeader {
    pub schema_version: u32,
    pub id: String,
    pub created_at: String,
    pub config: MethodConfig,
    pub covariate_names: Vec<String>,
    pub seed: u64,
    pub standardization: Standardization,
    /// Pre-drawn permuted-block assignments of the first n0 enrollments.
    pub block_sequence: Vec<Group>,
    /// In-block probability of group one at each block position.
    pub block_p_group1: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrialStatus {
    Recruiting,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentView {
    pub seq: usize,
    pub subject_id: String,
    pub group: Group,
}

/// `GET /trials/{id}`: trial state plus balance metrics on the enrolled subjects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialView {
    pub schema_version: u32,
    pub id: String,
    pub status: TrialStatus,
    pub config: MethodConfig,
    pub covariate_names: Vec<String>,
    pub standardization: Standardization,
    pub seed: u64,
    pub enrolled: usize,
    pub n1: usize,
    pub n2: usize,
    pub target_n: usize,
    /// Assignments in enrollment order.
    pub assignments: Vec<AssignmentView>,
    pub metrics: MetricReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogView {
    pub schema_version: u32,
    pub id: String,
    pub events: Vec<EnrollmentEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub id: String,
    pub status: TrialStatus,
    pub enrolled: usize,
    pub target_n: usize,
}

/// Raw covariate table carried in stateless requests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetPayload {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ids: Option<Vec<String>>,
}

/// `POST /allocate`: one-shot sequential trial over a dataset in row order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocateRequest {
    pub dataset: DatasetPayload,
    pub config: MethodConfig,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocateResponse {
    pub schema_version: u32,
    pub records: Vec<AllocationRecord>,
}

/// `POST /metrics`: balance metrics for a given allocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRequest {
    pub dataset: DatasetPayload,
    /// Group of each dataset row, in row (allocation) order.
    pub groups: Vec<Group>,
    #[serde(default)]
    pub n0: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub permutations: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Report on raw covariates instead of the z-scale.
    #[serde(default)]
    pub raw_scale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateRequest {
    pub dataset: DatasetPayload,
    pub methods: Vec<MethodConfig>,
    pub replicates: usize,
    pub seed: u64,
    #[serde(default = "default_true")]
    pub shuffle_arrivals: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jobs: Option<usize>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateResponse {
    pub schema_version: u32,
    pub records: Vec<ReplicateRecord>,
    pub summary: SummaryDocument,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HealthResponse {
    pub status: String,
    pub schema_version: u32,
    pub version: String,
}

/// Error body: `{code, message, detail}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default)]
    pub detail: serde_json::Value,
}
