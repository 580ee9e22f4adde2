//! Replicated Monte-Carlo comparison of allocation methods on one dataset.
//!
//! Replicate `r` of every method draws from `RngStream::new(seed, r)`. All
//! methods within a replicate see the same arrival order and, for equal block
//! settings, the same permuted-block draws, so comparisons are paired.

mod dataset;
mod summary;

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use dataset::{load_dataset, parse_dataset, Dataset};
pub use summary::{
    radar_summary, summarize, FiveNumber, MethodSummary, MetricSummary, RadarRow, RadarSummary, SummaryTable,
};

use crate::error::{Error, Result};
use crate::methods::{prepare_subjects, run_subjects, AllocationRecord};
use crate::metrics::MetricReport;
use crate::trial_core::{Group, Lane, MethodConfig, RngStream, Subject};

pub const SUMMARY_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone)]
pub struct SimulationPlan {
    pub dataset: Dataset,
    pub methods: Vec<MethodConfig>,
    pub replicates: usize,
    pub seed: u64,
    /// Reshuffle the arrival order in every replicate; otherwise rows arrive in file order.
    pub shuffle_arrivals: bool,
    /// Worker threads; `None` uses the rayon default.
    pub jobs: Option<usize>,
}

impl SimulationPlan {
    /// A plan whose method configs are sized to the dataset.
    pub fn new(dataset: Dataset, methods: Vec<MethodConfig>, replicates: usize, seed: u64) -> Self {
        let n = dataset.matrix.n_rows();
        let methods = methods
            .into_iter()
            .map(|mut m| {
                m.target_n = n;
                m
            })
            .collect();
        Self {
            dataset,
            methods,
            replicates,
            seed,
            shuffle_arrivals: true,
            jobs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.replicates == 0 {
            return Err(Error::InvalidPlan("replicates must be at least 1".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::InvalidPlan("at least one method is required".into()));
        }
        if self.jobs == Some(0) {
            return Err(Error::InvalidPlan("jobs must be at least 1".into()));
        }
        let n = self.dataset.matrix.n_rows();
        for m in &self.methods {
            if m.target_n != n {
                return Err(Error::InvalidPlan(format!(
                    "method {} targets {} subjects but the dataset has {n}",
                    m.method, m.target_n
                )));
            }
            m.validate()?;
        }
        Ok(())
    }

    /// Display labels, unique within the plan (`nt`, `nt_2`, ...).
    pub fn labels(&self) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for m in &self.methods {
            let base = m.method.tag().to_string();
            let mut label = base.clone();
            let mut k = 2;
            while out.contains(&label) {
                label = format!("{base}_{k}");
                k += 1;
            }
            out.push(label);
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub method: String,
    pub replicate: usize,
    pub report: Option<MetricReport>,
    /// Error code and message for a failed replicate.
    pub error: Option<String>,
    /// SHA-256 of the `(subject id, group)` sequence, hex encoded.
    pub digest: String,
}

impl ReplicateRecord {
    /// Flattened `(metric, value)` pairs, in a fixed order.
    pub fn metric_values(&self) -> Vec<(String, f64)> {
        let Some(r) = &self.report else {
            return Vec::new();
        };
        let mut out = vec![("abs_group_size_diff".to_string(), r.abs_group_size_diff as f64)];
        if let Some(e) = r.energy {
            out.push(("energy".into(), e));
        }
        if let Some(cg) = r.mean_cg {
            out.push(("mean_cg".into(), cg));
        }
        for c in &r.covariates {
            if let Some(v) = c.abs_mean_diff {
                out.push((format!("abs_mean_diff:{}", c.name), v));
            }
            if let Some(v) = c.abs_sd_diff {
                out.push((format!("abs_sd_diff:{}", c.name), v));
            }
        }
        out
    }
}

pub fn allocation_digest(records: &[AllocationRecord]) -> String {
    let mut h = Sha256::new();
    for r in records {
        h.update(r.subject_id.as_bytes());
        h.update([0u8, r.group.number(), b'\n']);
    }
    hex::encode(h.finalize())
}

fn run_replicate(
    label: &str,
    config: &MethodConfig,
    subjects: &[Subject],
    order: &[usize],
    names: &[String],
    stream: &RngStream,
    replicate: usize,
) -> ReplicateRecord {
    let ordered: Vec<Subject> = order.iter().map(|&i| subjects[i].clone()).collect();
    let rows: Vec<Vec<f64>> = ordered.iter().map(|s| s.standardized.clone()).collect();
    let outcome = run_subjects(ordered, config, stream).and_then(|records| {
        let groups: Vec<Group> = records.iter().map(|r| r.group).collect();
        let report = MetricReport::compute(names, &rows, &groups, config.n0, None)?;
        Ok((report, allocation_digest(&records)))
    });
    match outcome {
        Ok((report, digest)) => ReplicateRecord {
            method: label.to_string(),
            replicate,
            report: Some(report),
            error: None,
            digest,
        },
        Err(e) => ReplicateRecord {
            method: label.to_string(),
            replicate,
            report: None,
            error: Some(format!("{}: {e}", e.code())),
            digest: String::new(),
        },
    }
}

/// One trial over the dataset with subjects arriving in row order, using
/// `RngStream::new(seed, 0)`. The config's target size is set to the row count.
pub fn allocate_dataset(dataset: &Dataset, config: &MethodConfig, seed: u64) -> Result<Vec<AllocationRecord>> {
    let mut config = config.clone();
    config.target_n = dataset.matrix.n_rows();
    config.validate()?;
    let ids = dataset.subject_ids();
    let subjects = prepare_subjects(&dataset.matrix, Some(&ids), &config)?;
    run_subjects(subjects, &config, &RngStream::new(seed, 0))
}

/// Arrival order of replicate `r`.
pub fn arrival_order(stream: &RngStream, n: usize, shuffle: bool) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    if shuffle {
        stream.lane(Lane::Arrivals).shuffle(&mut order);
    }
    order
}

/// Run every method `replicates` times. Output is ordered by (method, replicate)
/// and does not depend on the number of worker threads.
pub fn simulate(plan: &SimulationPlan) -> Result<Vec<ReplicateRecord>> {
    plan.validate()?;
    let labels = plan.labels();
    let ids = plan.dataset.subject_ids();
    let names = plan.dataset.matrix.names().to_vec();
    let prepared = plan
        .methods
        .iter()
        .map(|m| prepare_subjects(&plan.dataset.matrix, Some(&ids), m))
        .collect::<Result<Vec<_>>>()?;
    let n = plan.dataset.matrix.n_rows();

    let work = || -> Vec<Vec<ReplicateRecord>> {
        (0..plan.replicates)
            .into_par_iter()
            .map(|r| {
                let stream = RngStream::new(plan.seed, r as u64);
                let order = arrival_order(&stream, n, plan.shuffle_arrivals);
                plan.methods
                    .iter()
                    .zip(&prepared)
                    .zip(&labels)
                    .map(|((cfg, subjects), label)| run_replicate(label, cfg, subjects, &order, &names, &stream, r))
                    .collect()
            })
            .collect()
    };
    let by_replicate = match plan.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::InvalidPlan(e.to_string()))?
            .install(work),
        None => work(),
    };

    let mut out = Vec::with_capacity(plan.replicates * plan.methods.len());
    for m in 0..plan.methods.len() {
        for rep in &by_replicate {
            out.push(rep[m].clone());
        }
    }
    Ok(out)
}

/// Long-format `method,replicate,metric,value` CSV.
pub fn write_records_csv(records: &[ReplicateRecord], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let io = |e: csv::Error| Error::Io(e.to_string());
    w.write_record(["method", "replicate", "metric", "value"]).map_err(io)?;
    for r in records {
        let rep = r.replicate.to_string();
        if let Some(err) = &r.error {
            w.write_record([r.method.as_str(), &rep, "error", err]).map_err(io)?;
            continue;
        }
        for (metric, value) in r.metric_values() {
            w.write_record([r.method.as_str(), &rep, &metric, &value.to_string()])
                .map_err(io)?;
        }
        w.write_record([r.method.as_str(), &rep, "digest", &r.digest])
            .map_err(io)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelledConfig {
    pub label: String,
    pub config: MethodConfig,
}

/// Contents of `summary.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryDocument {
    pub schema_version: u32,
    pub seed: u64,
    pub replicates: usize,
    pub shuffle_arrivals: bool,
    pub n_subjects: usize,
    pub covariates: Vec<String>,
    pub methods: Vec<LabelledConfig>,
    pub table: SummaryTable,
    pub radar: RadarSummary,
}

impl SummaryDocument {
    pub fn build(plan: &SimulationPlan, records: &[ReplicateRecord]) -> Self {
        Self {
            schema_version: SUMMARY_SCHEMA_VERSION,
            seed: plan.seed,
            replicates: plan.replicates,
            shuffle_arrivals: plan.shuffle_arrivals,
            n_subjects: plan.dataset.matrix.n_rows(),
            covariates: plan.dataset.matrix.names().to_vec(),
            methods: plan
                .labels()
                .into_iter()
                .zip(&plan.methods)
                .map(|(label, config)| LabelledConfig {
                    label,
                    config: config.clone(),
                })
                .collect(),
            table: summarize(records),
            radar: radar_summary(records),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trial_core::{CovariateMatrix, Method};

    fn synthetic(n: usize, p: usize, seed: u64) -> Dataset {
        let mut rng = RngStream::new(seed, 99);
        let names = (0..p).map(|j| format!("c{j}")).collect();
        let rows = (0..n).map(|_| (0..p).map(|_| rng.uniform() * 10.0).collect()).collect();
        Dataset {
            ids: None,
            matrix: CovariateMatrix::new(names, rows).unwrap(),
        }
    }

    fn all_methods() -> Vec<MethodConfig> {
        Method::ALL.iter().map(|&m| MethodConfig::new(m, 0)).collect()
    }

    #[test]
    fn one_replicate_one_record_per_method() {
        let plan = SimulationPlan::new(synthetic(18, 3, 1), all_methods(), 1, 7);
        let recs = simulate(&plan).unwrap();
        assert_eq!(recs.len(), 4);
        assert!(recs.iter().all(|r| r.error.is_none()));
    }

    #[test]
    fn bkw_always_balanced() {
        let plan = SimulationPlan::new(synthetic(18, 3, 2), vec![MethodConfig::new(Method::Bkw, 0)], 50, 3);
        for r in simulate(&plan).unwrap() {
            assert_eq!(r.report.unwrap().abs_group_size_diff, 0);
        }
    }

    #[test]
    fn same_plan_same_bytes_any_thread_count() {
        let mut plan = SimulationPlan::new(synthetic(18, 2, 4), all_methods(), 20, 11);
        let mut outputs = Vec::new();
        for jobs in [Some(1), Some(3), None] {
            plan.jobs = jobs;
            let recs = simulate(&plan).unwrap();
            let mut buf = Vec::new();
            write_records_csv(&recs, &mut buf).unwrap();
            outputs.push(buf);
        }
        assert_eq!(outputs[0], outputs[1]);
        assert_eq!(outputs[0], outputs[2]);
    }

    #[test]
    fn paired_block_draws_across_methods() {
        let plan = SimulationPlan::new(synthetic(12, 2, 5), all_methods(), 1, 8);
        let stream = RngStream::new(8, 0);
        let order = arrival_order(&stream, 12, true);
        let ids = plan.dataset.subject_ids();
        let mut firsts = Vec::new();
        for m in &plan.methods {
            let subjects = prepare_subjects(&plan.dataset.matrix, Some(&ids), m).unwrap();
            let ordered = order.iter().map(|&i| subjects[i].clone()).collect();
            let recs = run_subjects(ordered, m, &stream).unwrap();
            firsts.push(
                recs[..8]
                    .iter()
                    .map(|r| (r.subject_id.clone(), r.group))
                    .collect::<Vec<_>>(),
            );
        }
        assert!(firsts.windows(2).all(|w| w[0] == w[1]));
    }

    #[test]
    fn invalid_plans() {
        let plan = SimulationPlan::new(synthetic(18, 2, 1), all_methods(), 0, 1);
        assert!(matches!(simulate(&plan), Err(Error::InvalidPlan(_))));
        let plan = SimulationPlan::new(synthetic(18, 2, 1), vec![], 3, 1);
        assert!(simulate(&plan).is_err());
        let plan = SimulationPlan::new(synthetic(17, 2, 1), vec![MethodConfig::new(Method::Bkw, 0)], 3, 1);
        assert_eq!(simulate(&plan).unwrap_err(), Error::OddTargetN(17));
    }

    #[test]
    fn duplicate_methods_get_distinct_labels() {
        let plan = SimulationPlan::new(
            synthetic(18, 2, 1),
            vec![MethodConfig::new(Method::Nt, 0), MethodConfig::new(Method::Nt, 0)],
            1,
            1,
        );
        assert_eq!(plan.labels(), vec!["nt", "nt_2"]);
    }
}
