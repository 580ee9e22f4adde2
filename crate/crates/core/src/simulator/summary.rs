use serde::{Deserialize, Serialize};

use super::ReplicateRecord;
use crate::trial_core::quantile_sorted;

/// Five-number summary plus mean, quartiles by linear interpolation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiveNumber {
    pub count: usize,
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
    pub mean: f64,
}

impl FiveNumber {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(Self {
            count: v.len(),
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
            mean: v.iter().sum::<f64>() / v.len() as f64,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub metric: String,
    #[serde(flatten)]
    pub stats: FiveNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub replicates: usize,
    pub failed: usize,
    pub metrics: Vec<MetricSummary>,
}

pub type SummaryTable = Vec<MethodSummary>;

/// Methods in first-appearance order.
fn method_order(records: &[ReplicateRecord]) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    for r in records {
        if !out.contains(&r.method) {
            out.push(r.method.clone());
        }
    }
    out
}

/// Five-number summary per (method, metric). Failed replicates are counted
/// and left out.
pub fn summarize(records: &[ReplicateRecord]) -> SummaryTable {
    method_order(records)
        .into_iter()
        .map(|method| {
            let rows: Vec<&ReplicateRecord> = records.iter().filter(|r| r.method == method).collect();
            let failed = rows.iter().filter(|r| r.error.is_some()).count();
            let mut metric_names: Vec<String> = Vec::new();
            for r in &rows {
                for (k, _) in r.metric_values() {
                    if !metric_names.contains(&k) {
                        metric_names.push(k);
                    }
                }
            }
            let metrics = metric_names
                .into_iter()
                .filter_map(|name| {
                    let vals: Vec<f64> = rows
                        .iter()
                        .flat_map(|r| r.metric_values())
                        .filter(|(k, _)| *k == name)
                        .map(|(_, v)| v)
                        .collect();
                    FiveNumber::of(&vals).map(|stats| MetricSummary { metric: name, stats })
                })
                .collect();
            MethodSummary {
                method,
                replicates: rows.len(),
                failed,
                metrics,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarRow {
    pub method: String,
    pub avg_abs_group_size_diff: f64,
    pub avg_energy: f64,
    pub avg_mean_cg: f64,
    /// The three averages divided by the largest average of each corner.
    pub normalized: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarSummary {
    pub axes: [String; 3],
    /// Largest average per corner across methods.
    pub maxima: [f64; 3],
    pub rows: Vec<RadarRow>,
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        f64::NAN
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Per-method averages of group-size difference, energy distance and mean
/// correct-guess probability, with each corner scaled by its maximum.
pub fn radar_summary(records: &[ReplicateRecord]) -> RadarSummary {
    let mut rows: Vec<RadarRow> = method_order(records)
        .into_iter()
        .map(|method| {
            let reports: Vec<_> = records
                .iter()
                .filter(|r| r.method == method)
                .filter_map(|r| r.report.as_ref())
                .collect();
            let size: Vec<f64> = reports.iter().map(|r| r.abs_group_size_diff as f64).collect();
            let energy: Vec<f64> = reports.iter().filter_map(|r| r.energy).collect();
            let cg: Vec<f64> = reports.iter().filter_map(|r| r.mean_cg).collect();
            RadarRow {
                method,
                avg_abs_group_size_diff: mean(&size),
                avg_energy: mean(&energy),
                avg_mean_cg: mean(&cg),
                normalized: [0.0; 3],
            }
        })
        .collect();
    let corner = |r: &RadarRow| [r.avg_abs_group_size_diff, r.avg_energy, r.avg_mean_cg];
    let mut maxima = [0.0f64; 3];
    for r in &rows {
        for (m, v) in maxima.iter_mut().zip(corner(r)) {
            if v.is_finite() {
                *m = m.max(v);
            }
        }
    }
    for r in &mut rows {
        let vals = corner(r);
        for k in 0..3 {
            r.normalized[k] = if maxima[k] > 0.0 && vals[k].is_finite() {
                vals[k] / maxima[k]
            } else {
                0.0
            };
        }
    }
    RadarSummary {
        axes: ["abs_group_size_diff".into(), "energy".into(), "mean_cg".into()],
        maxima,
        rows,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricReport;

    fn record(method: &str, rep: usize, size: usize, energy: f64, cg: f64) -> ReplicateRecord {
        ReplicateRecord {
            method: method.into(),
            replicate: rep,
            report: Some(MetricReport {
                n1: 0,
                n2: size,
                abs_group_size_diff: size,
                covariates: vec![],
                energy: Some(energy),
                energy_p_value: None,
                cg_series: vec![cg],
                mean_cg: Some(cg),
            }),
            error: None,
            digest: String::new(),
        }
    }

    #[test]
    fn identical_values_collapse() {
        let s = FiveNumber::of(&[2.0; 5]).unwrap();
        assert_eq!((s.min, s.q1, s.median, s.q3, s.max), (2.0, 2.0, 2.0, 2.0, 2.0));
    }

    #[test]
    fn one_to_five_quartiles() {
        let s = FiveNumber::of(&[5.0, 3.0, 1.0, 4.0, 2.0]).unwrap();
        assert_eq!((s.q1, s.median, s.q3, s.mean), (2.0, 3.0, 4.0, 3.0));
    }

    #[test]
    fn summary_excludes_failures() {
        let mut recs = vec![record("bkw", 0, 0, 0.4, 0.7), record("bkw", 1, 0, 0.6, 0.9)];
        recs.push(ReplicateRecord {
            method: "bkw".into(),
            replicate: 2,
            report: None,
            error: Some("boom".into()),
            digest: String::new(),
        });
        let t = summarize(&recs);
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].failed, 1);
        let size = t[0].metrics.iter().find(|m| m.metric == "abs_group_size_diff").unwrap();
        assert_eq!(size.stats.count, 2);
        assert_eq!(size.stats.max, 0.0);
    }

    #[test]
    fn radar_single_replicate_and_dominance() {
        let r = radar_summary(&[record("ps", 0, 2, 0.8, 0.6)]);
        assert_eq!(r.rows[0].avg_abs_group_size_diff, 2.0);
        assert_eq!(r.rows[0].avg_energy, 0.8);
        assert_eq!(r.rows[0].normalized, [1.0, 1.0, 1.0]);

        let r = radar_summary(&[record("a", 0, 4, 0.9, 0.7), record("b", 0, 2, 0.3, 0.6)]);
        for k in 0..3 {
            assert!(r.rows[0].normalized[k] >= r.rows[1].normalized[k]);
            assert!((0.0..=1.0).contains(&r.rows[1].normalized[k]));
        }
        assert_eq!(r.rows[0].normalized, [1.0, 1.0, 1.0]);
        assert_eq!(r.rows[1].normalized[0], 0.5);
        assert!((r.rows[1].normalized[1] - 0.3 / 0.9).abs() < 1e-15);
    }
}
