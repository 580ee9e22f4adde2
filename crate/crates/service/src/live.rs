//! Live trials: enrollment, the working covariate scale and log replay.
//!
//! Enrollment `t` (1-based) is fully determined by the header, the events
//! before it and the arriving subject:
//!
//! * for `t <= n0` the group is the header's pre-drawn block assignment;
//! * afterwards covariates are re-standardized, discretized for PS, and the
//!   adaptive step draws from the allocation lane of `RngStream::new(seed, t)`.
//!
//! The draws are stored in the event, so replay recomputes every decision
//! from the log alone and compares it bit for bit.

use covbal_api::{
    AssignmentView, CreateTrialRequest, EnrollRequest, EnrollmentEvent, Standardization, TrialHeader, TrialStatus,
    TrialSummary, TrialView, SCHEMA_VERSION,
};
use covbal_core::methods::{allocate_next, allocate_with_draws, AllocationRecord, Phase, StepDraws};
use covbal_core::metrics::MetricReport;
use covbal_core::trial_core::{
    block_probabilities, permuted_block_init, Discretization, Lane, Method, RngStream, Standardizer, Subject,
    TrialState,
};
use covbal_core::Error as CoreError;

use crate::error::{Result, ServiceError};

/// Generator for the adaptive step at sequence number `seq`.
pub fn step_stream(seed: u64, seq: usize) -> RngStream {
    RngStream::new(seed, seq as u64).lane(Lane::Allocation)
}

/// Generator for the permuted-block sequence drawn at creation.
pub fn block_stream(seed: u64) -> RngStream {
    RngStream::new(seed, 0).lane(Lane::Blocks)
}

fn invalid(field: &str, message: impl Into<String>) -> ServiceError {
    ServiceError::Core(CoreError::InvalidConfig {
        field: field.to_string(),
        message: message.into(),
    })
}

fn validate_request(req: &CreateTrialRequest) -> Result<()> {
    req.config.validate()?;
    let names = &req.covariate_names;
    if names.is_empty() {
        return Err(invalid("covariate_names", "at least one covariate is required"));
    }
    if let Some(blank) = names.iter().position(|n| n.trim().is_empty()) {
        return Err(invalid("covariate_names", format!("name {} is blank", blank + 1)));
    }
    for (i, n) in names.iter().enumerate() {
        if names[..i].contains(n) {
            return Err(invalid("covariate_names", format!("duplicate name {n:?}")));
        }
    }
    if req.standardization == Standardization::FreezeAfterBlock && req.config.n0 < 2 {
        return Err(invalid(
            "standardization",
            "freeze_after_block needs at least two block-phase subjects (n0 >= 2)",
        ));
    }
    Ok(())
}

/// The covariate scale in force for one enrollment.
struct WorkingScale {
    standardizer: Standardizer,
    cuts: Option<Vec<Discretization>>,
}

impl WorkingScale {
    fn subject(&self, id: &str, raw: &[f64]) -> Subject {
        let z = self.standardizer.apply(raw);
        let cats = self
            .cuts
            .as_ref()
            .map(|cuts| z.iter().zip(cuts).map(|(&v, d)| d.category(v)).collect());
        let s = Subject::new(id, raw.to_vec(), z);
        match cats {
            Some(c) => s.with_categories(c),
            None => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LiveTrial {
    header: TrialHeader,
    events: Vec<EnrollmentEvent>,
}

impl LiveTrial {
    /// Validate the request and draw the block sequence.
    pub fn create(id: String, req: CreateTrialRequest, seed: u64, created_at: String) -> Result<Self> {
        validate_request(&req)?;
        let config = req.config;
        let blocks = permuted_block_init(config.n0, config.block_size, &mut block_stream(seed))?;
        let block_p = block_probabilities(&blocks, config.block_size);
        Ok(Self {
            header: TrialHeader {
                schema_version: SCHEMA_VERSION,
                id,
                created_at,
                config,
                covariate_names: req.covariate_names,
                seed,
                standardization: req.standardization,
                block_sequence: blocks,
                block_p_group1: block_p,
            },
            events: Vec::new(),
        })
    }

    pub fn header(&self) -> &TrialHeader {
        &self.header
    }

    pub fn events(&self) -> &[EnrollmentEvent] {
        &self.events
    }

    pub fn id(&self) -> &str {
        &self.header.id
    }

    pub fn enrolled(&self) -> usize {
        self.events.len()
    }

    pub fn p(&self) -> usize {
        self.header.covariate_names.len()
    }

    pub fn status(&self) -> TrialStatus {
        if self.enrolled() >= self.header.config.target_n {
            TrialStatus::Full
        } else {
            TrialStatus::Recruiting
        }
    }

    pub fn summary(&self) -> TrialSummary {
        TrialSummary {
            id: self.header.id.clone(),
            status: self.status(),
            enrolled: self.enrolled(),
            target_n: self.header.config.target_n,
        }
    }

    /// Compute the next enrollment without changing the trial. The caller
    /// persists the event and then calls [`commit`](Self::commit).
    pub fn propose(&self, req: EnrollRequest, timestamp: String) -> Result<EnrollmentEvent> {
        if self.status() == TrialStatus::Full {
            return Err(CoreError::TrialFull(self.enrolled()).into());
        }
        if req.covariates.len() != self.p() {
            return Err(CoreError::DimensionMismatch {
                expected: self.p(),
                found: req.covariates.len(),
            }
            .into());
        }
        if let Some(j) = req.covariates.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidMatrix(format!(
                "covariate {:?} is not a finite number",
                self.header.covariate_names[j]
            ))
            .into());
        }
        let seq = self.enrolled() + 1;
        let subject_id = req.subject_id.unwrap_or_else(|| seq.to_string());
        if self.events.iter().any(|e| e.subject_id == subject_id) {
            return Err(invalid(
                "subject_id",
                format!("subject {subject_id:?} is already enrolled"),
            ));
        }
        self.step(seq, subject_id, req.covariates, timestamp, None)
    }

    /// Append an event produced by [`propose`](Self::propose).
    pub fn commit(&mut self, event: EnrollmentEvent) {
        debug_assert_eq!(event.seq, self.enrolled() + 1);
        self.events.push(event);
    }

    /// Rebuild a trial from its log, re-deriving every decision from the
    /// recorded draws. Any disagreement is reported as a corrupt log at the
    /// first offending sequence number.
    pub fn replay(header: TrialHeader, events: Vec<EnrollmentEvent>) -> Result<Self> {
        let id = header.id.clone();
        let corrupt = |seq: usize, reason: String| ServiceError::CorruptLog {
            id: id.clone(),
            seq,
            reason,
        };
        if header.schema_version != SCHEMA_VERSION {
            return Err(corrupt(
                0,
                format!("unsupported schema version {}", header.schema_version),
            ));
        }
        let request = CreateTrialRequest {
            config: header.config.clone(),
            covariate_names: header.covariate_names.clone(),
            seed: Some(header.seed),
            standardization: header.standardization,
        };
        let fresh = Self::create(header.id.clone(), request, header.seed, header.created_at.clone())
            .map_err(|e| corrupt(0, format!("header is not a valid trial: {e}")))?;
        if fresh.header != header {
            return Err(corrupt(0, "block sequence does not match the trial seed".into()));
        }

        let mut trial = fresh;
        for (i, event) in events.into_iter().enumerate() {
            let seq = i + 1;
            if event.seq != seq {
                return Err(corrupt(seq, format!("expected sequence {seq}, found {}", event.seq)));
            }
            if trial.status() == TrialStatus::Full {
                return Err(corrupt(seq, "event after the trial was full".into()));
            }
            if event.raw.len() != trial.p() {
                return Err(corrupt(seq, "covariate vector has the wrong length".into()));
            }
            let draws = (event.phase == Phase::Adaptive).then_some(event.draws);
            let again = trial
                .step(
                    seq,
                    event.subject_id.clone(),
                    event.raw.clone(),
                    event.timestamp.clone(),
                    draws,
                )
                .map_err(|e| corrupt(seq, format!("cannot recompute: {e}")))?;
            if again != event {
                return Err(corrupt(seq, "recorded decision differs from the recomputed one".into()));
            }
            trial.events.push(event);
        }
        Ok(trial)
    }

    /// Rows that define the scale for an enrollment when `n` subjects
    /// (including any arriving one) are on record.
    fn scale_population(&self, n: usize) -> usize {
        match self.header.standardization {
            Standardization::Continuous => n,
            Standardization::FreezeAfterBlock => n.min(self.header.config.n0),
        }
    }

    fn working_scale(&self, raws: &[&[f64]]) -> Result<WorkingScale> {
        let p = self.p();
        let pop: Vec<Vec<f64>> = raws[..self.scale_population(raws.len())]
            .iter()
            .map(|r| r.to_vec())
            .collect();
        let standardizer = Standardizer::fit_lenient(&pop, p);
        let cuts = if self.header.config.method == Method::Ps && !pop.is_empty() {
            let z: Vec<Vec<f64>> = pop.iter().map(|r| standardizer.apply(r)).collect();
            Some(
                (0..p)
                    .map(|j| {
                        Discretization::fit(
                            &z.iter().map(|r| r[j]).collect::<Vec<_>>(),
                            self.header.config.categories,
                        )
                    })
                    .collect::<std::result::Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        Ok(WorkingScale { standardizer, cuts })
    }

    /// Enrolled subjects on `scale`, paired with their groups.
    fn state_on(&self, scale: &WorkingScale) -> Result<TrialState> {
        let config = &self.header.config;
        let categories = (config.method == Method::Ps).then_some(config.categories);
        let assignments = self
            .events
            .iter()
            .map(|e| (scale.subject(&e.subject_id, &e.raw), e.group));
        Ok(TrialState::from_assignments(
            self.p(),
            config.target_n,
            categories,
            assignments,
        )?)
    }

    fn step(
        &self,
        seq: usize,
        subject_id: String,
        raw: Vec<f64>,
        timestamp: String,
        recorded: Option<StepDraws>,
    ) -> Result<EnrollmentEvent> {
        let header = &self.header;
        let blocks = &header.block_sequence;
        if seq <= blocks.len() {
            return Ok(EnrollmentEvent {
                seq,
                timestamp,
                subject_id,
                raw,
                group: blocks[seq - 1],
                p_group1: header.block_p_group1[seq - 1],
                phase: Phase::Block,
                d: None,
                forced: false,
                draws: StepDraws::default(),
                stream: None,
                evaluation: None,
            });
        }

        let mut raws: Vec<&[f64]> = self.events.iter().map(|e| e.raw.as_slice()).collect();
        raws.push(&raw);
        let scale = self.working_scale(&raws)?;
        let state = self.state_on(&scale)?;
        let subject = scale.subject(&subject_id, &raw);
        let record: AllocationRecord = match recorded {
            Some(draws) => {
                let (mut r, _) = allocate_with_draws(&state, subject, &header.config, draws)?;
                r.stream = Some(step_stream(header.seed, seq).key());
                r
            }
            None => allocate_next(&state, subject, &header.config, &mut step_stream(header.seed, seq))?.0,
        };
        Ok(EnrollmentEvent {
            seq,
            timestamp,
            subject_id,
            raw,
            group: record.group,
            p_group1: record.p_group1,
            phase: record.phase,
            d: record.d,
            forced: record.forced,
            draws: record.draws,
            stream: record.stream,
            evaluation: record.evaluation,
        })
    }

    /// Enrolled subjects on the scale that the next enrollment would use,
    /// excluding the arriving subject.
    pub fn working_state(&self) -> Result<TrialState> {
        let raws: Vec<&[f64]> = self.events.iter().map(|e| e.raw.as_slice()).collect();
        let scale = self.working_scale(&raws)?;
        self.state_on(&scale)
    }

    pub fn view(&self) -> Result<TrialView> {
        let state = self.working_state()?;
        let rows: Vec<&[f64]> = state
            .assignments()
            .iter()
            .map(|(s, _)| s.standardized.as_slice())
            .collect();
        let groups = state.groups();
        let metrics = MetricReport::compute(
            &self.header.covariate_names,
            &rows,
            &groups,
            self.header.config.n0,
            None,
        )?;
        Ok(TrialView {
            schema_version: SCHEMA_VERSION,
            id: self.header.id.clone(),
            status: self.status(),
            config: self.header.config.clone(),
            covariate_names: self.header.covariate_names.clone(),
            standardization: self.header.standardization,
            seed: self.header.seed,
            enrolled: self.enrolled(),
            n1: state.n1(),
            n2: state.n2(),
            target_n: self.header.config.target_n,
            assignments: self
                .events
                .iter()
                .map(|e| AssignmentView {
                    seq: e.seq,
                    subject_id: e.subject_id.clone(),
                    group: e.group,
                })
                .collect(),
            metrics,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use covbal_core::trial_core::{Group, MethodConfig};

    fn request(method: Method, n: usize, p: usize) -> CreateTrialRequest {
        CreateTrialRequest {
            config: MethodConfig::new(method, n),
            covariate_names: (0..p).map(|j| format!("x{j}")).collect(),
            seed: None,
            standardization: Standardization::Continuous,
        }
    }

    fn covariates(seq: usize, p: usize) -> Vec<f64> {
        (0..p)
            .map(|j| ((seq * 7 + j * 13) % 11) as f64 + 0.25 * j as f64)
            .collect()
    }

    fn fill(trial: &mut LiveTrial, upto: usize) {
        let p = trial.p();
        while trial.enrolled() < upto {
            let seq = trial.enrolled() + 1;
            let req = EnrollRequest {
                subject_id: None,
                covariates: covariates(seq, p),
            };
            let e = trial.propose(req, format!("t{seq}")).unwrap();
            trial.commit(e);
        }
    }

    #[test]
    fn first_enrollment_is_an_equiprobable_block_draw() {
        let mut t = LiveTrial::create("a".into(), request(Method::Nt, 18, 3), 5, "now".into()).unwrap();
        fill(&mut t, 1);
        let e = &t.events()[0];
        assert_eq!(e.phase, Phase::Block);
        assert_eq!(e.p_group1, 0.5);
        assert_eq!(e.group, t.header().block_sequence[0]);
    }

    #[test]
    fn bkw_trial_ends_nine_nine_and_then_rejects() {
        let mut t = LiveTrial::create("b".into(), request(Method::Bkw, 18, 3), 9, "now".into()).unwrap();
        fill(&mut t, 8);
        let v = t.view().unwrap();
        assert_eq!(v.metrics.abs_group_size_diff, 0);
        fill(&mut t, 18);
        let v = t.view().unwrap();
        assert_eq!((v.n1, v.n2, v.status), (9, 9, TrialStatus::Full));
        let err = t
            .propose(
                EnrollRequest {
                    subject_id: None,
                    covariates: vec![1.0, 2.0, 3.0],
                },
                "late".into(),
            )
            .unwrap_err();
        assert_eq!(err, ServiceError::Core(CoreError::TrialFull(18)));
    }

    #[test]
    fn create_rejects_bad_configs() {
        let mut r = request(Method::Nt, 8, 2);
        r.config.n0 = 8;
        assert_eq!(
            LiveTrial::create("c".into(), r, 1, "now".into()).unwrap_err().code(),
            "invalid_config"
        );
        let mut r = request(Method::Nt, 18, 2);
        r.covariate_names = vec!["age".into(), "age".into()];
        let err = LiveTrial::create("c".into(), r, 1, "now".into()).unwrap_err();
        assert!(
            matches!(err, ServiceError::Core(CoreError::InvalidConfig { ref field, .. }) if field == "covariate_names")
        );
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let t = LiveTrial::create("d".into(), request(Method::Mh, 18, 3), 1, "now".into()).unwrap();
        let err = t
            .propose(
                EnrollRequest {
                    subject_id: None,
                    covariates: vec![1.0],
                },
                "x".into(),
            )
            .unwrap_err();
        assert_eq!(
            err,
            ServiceError::Core(CoreError::DimensionMismatch { expected: 3, found: 1 })
        );
    }

    #[test]
    fn empty_trial_view_has_no_energy() {
        let t = LiveTrial::create("e".into(), request(Method::Ps, 18, 2), 1, "now".into()).unwrap();
        let v = t.view().unwrap();
        assert_eq!(v.enrolled, 0);
        assert_eq!(v.metrics.energy, None);
        assert_eq!(v.status, TrialStatus::Recruiting);
    }

    #[test]
    fn replay_reproduces_every_method() {
        for method in Method::ALL {
            for mode in [Standardization::Continuous, Standardization::FreezeAfterBlock] {
                let mut r = request(method, 18, 3);
                r.standardization = mode;
                let mut t = LiveTrial::create("r".into(), r, 77, "now".into()).unwrap();
                fill(&mut t, 18);
                let again = LiveTrial::replay(t.header().clone(), t.events().to_vec()).unwrap();
                assert_eq!(again, t);
                assert_eq!(again.view().unwrap(), t.view().unwrap());
            }
        }
    }

    #[test]
    fn replay_of_empty_log_is_empty() {
        let t = LiveTrial::create("z".into(), request(Method::Bkw, 10, 1), 3, "now".into()).unwrap();
        let again = LiveTrial::replay(t.header().clone(), vec![]).unwrap();
        assert_eq!(again.enrolled(), 0);
        assert_eq!(again.working_state().unwrap().allocated(), 0);
    }

    #[test]
    fn replay_detects_gaps_and_tampering() {
        let mut t = LiveTrial::create("g".into(), request(Method::Nt, 18, 2), 4, "now".into()).unwrap();
        fill(&mut t, 12);
        let mut gap = t.events().to_vec();
        gap.remove(9);
        match LiveTrial::replay(t.header().clone(), gap).unwrap_err() {
            ServiceError::CorruptLog { seq, .. } => assert_eq!(seq, 10),
            e => panic!("unexpected {e}"),
        }
        let mut flipped = t.events().to_vec();
        flipped[10].group = flipped[10].group.other();
        match LiveTrial::replay(t.header().clone(), flipped).unwrap_err() {
            ServiceError::CorruptLog { seq, .. } => assert_eq!(seq, 11),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn constant_covariate_maps_to_zero_until_it_varies() {
        let mut t = LiveTrial::create("k".into(), request(Method::Nt, 12, 2), 8, "now".into()).unwrap();
        for seq in 1..=9 {
            let e = t
                .propose(
                    EnrollRequest {
                        subject_id: None,
                        covariates: vec![seq as f64, 5.0],
                    },
                    "t".into(),
                )
                .unwrap();
            t.commit(e);
        }
        let state = t.working_state().unwrap();
        assert!(state.assignments().iter().all(|(s, _)| s.standardized[1] == 0.0));
        assert_eq!(t.events()[8].phase, Phase::Adaptive);
        assert!(t.events()[8].draws.coin_uniform.is_some());
        assert!(matches!(t.events()[8].group, Group::One | Group::Two));
    }
}
