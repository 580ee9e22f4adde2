use std::collections::HashMap;
use std::io::Write;
use std::path::Path;

use covbal_api::DatasetPayload;
use covbal_core::methods::AllocationRecord;
use covbal_core::simulator::{Dataset, SummaryDocument};
use covbal_core::trial_core::{CovariateMatrix, Group};

use crate::{CliError, CliResult};

pub fn payload(d: &Dataset) -> DatasetPayload {
    DatasetPayload {
        names: d.matrix.names().to_vec(),
        rows: d.matrix.to_rows(),
        ids: d.ids.clone(),
    }
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Domain(e.to_string())
}

/// `subject_id,step,group,d,p_group1,forced`; `d` is blank for block-phase steps.
pub fn write_allocation(records: &[AllocationRecord], out: impl Write) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["subject_id", "step", "group", "d", "p_group1", "forced"])
        .map_err(csv_err)?;
    for r in records {
        w.write_record([
            r.subject_id.clone(),
            r.step.to_string(),
            r.group.number().to_string(),
            r.d.map(|d| d.to_string()).unwrap_or_default(),
            r.p_group1.to_string(),
            r.forced.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// `(subject id, group)` pairs in file order. The id column may be headed
/// `subject_id`, `subject` or `id`; other columns are ignored.
pub fn read_allocation(path: &Path) -> CliResult<Vec<(String, Group)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Domain(format!("{}: {e}", path.display())))?;
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let find = |names: &[&str]| {
        headers
            .iter()
            .position(|h| names.contains(&h.to_ascii_lowercase().as_str()))
    };
    let id_col = find(&["subject_id", "subject", "id"])
        .ok_or_else(|| CliError::Domain(format!("{}: no subject_id column", path.display())))?;
    let group_col = find(&["group"]).ok_or_else(|| CliError::Domain(format!("{}: no group column", path.display())))?;

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        let line = i + 2;
        let id = rec.get(id_col).unwrap_or_default().to_string();
        let raw = rec.get(group_col).unwrap_or_default();
        let group =
            raw.parse::<u8>().ok().and_then(Group::from_number).ok_or_else(|| {
                CliError::Domain(format!("{}:{line}: group must be 1 or 2, got {raw:?}", path.display()))
            })?;
        out.push((id, group));
    }
    Ok(out)
}

/// Dataset rows reordered to allocation order, with their groups. The
/// allocation must name every dataset subject exactly once.
pub fn align(dataset: &Dataset, allocation: &[(String, Group)]) -> CliResult<(CovariateMatrix, Vec<Group>)> {
    let ids = dataset.subject_ids();
    let index: HashMap<&str, usize> = ids.iter().enumerate().map(|(i, id)| (id.as_str(), i)).collect();
    let mut seen = vec![false; ids.len()];
    let mut order = Vec::with_capacity(allocation.len());
    for (id, _) in allocation {
        let &i = index
            .get(id.as_str())
            .ok_or_else(|| CliError::Domain(format!("allocation names subject {id:?}, which is not in the dataset")))?;
        if std::mem::replace(&mut seen[i], true) {
            return Err(CliError::Domain(format!(
                "subject {id:?} appears twice in the allocation"
            )));
        }
        order.push(i);
    }
    if let Some(i) = seen.iter().position(|s| !s) {
        return Err(CliError::Domain(format!(
            "dataset subject {:?} is missing from the allocation",
            ids[i]
        )));
    }
    let groups = allocation.iter().map(|(_, g)| *g).collect();
    Ok((dataset.matrix.permuted(&order), groups))
}

fn fmt_avg(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "n/a".into()
    }
}

/// Human-readable radar summary: per-method averages and their scaled values.
pub fn radar_table(summary: &SummaryDocument) -> String {
    let mut s = format!(
        "{:<8} {:>12} {:>10} {:>10}   {:>6} {:>6} {:>6}\n",
        "method", "|N1-N2|", "energy", "mean CG", "size", "energy", "CG"
    );
    for r in &summary.radar.rows {
        s += &format!(
            "{:<8} {:>12} {:>10} {:>10}   {:>6.3} {:>6.3} {:>6.3}\n",
            r.method,
            fmt_avg(r.avg_abs_group_size_diff),
            fmt_avg(r.avg_energy),
            fmt_avg(r.avg_mean_cg),
            r.normalized[0],
            r.normalized[1],
            r.normalized[2],
        );
    }
    s
}
