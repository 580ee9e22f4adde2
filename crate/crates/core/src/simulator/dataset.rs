use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::trial_core::CovariateMatrix;

/// A covariate table with optional subject ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub ids: Option<Vec<String>>,
    pub matrix: CovariateMatrix,
}

impl Dataset {
    /// Subject ids, defaulting to the 1-based row numbers.
    pub fn subject_ids(&self) -> Vec<String> {
        self.ids
            .clone()
            .unwrap_or_else(|| (1..=self.matrix.n_rows()).map(|i| i.to_string()).collect())
    }
}

const ID_HEADERS: [&str; 4] = ["id", "subject", "subject_id", "subject id"];

/// Load a CSV dataset: a header row of covariate names followed by numeric
/// rows. A leading column headed `id`, `subject` or `subject_id` holds ids.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let file =
        std::fs::File::open(path.as_ref()).map_err(|e| Error::Io(format!("{}: {e}", path.as_ref().display())))?;
    parse_dataset(file)
}

pub fn parse_dataset(reader: impl Read) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Fields)
        .from_reader(reader);
    let headers = rdr.headers().map_err(|e| csv_error(&e, 1))?.clone();
    if headers.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "missing header row".into(),
        });
    }
    let has_ids = ID_HEADERS.contains(&headers[0].trim().to_ascii_lowercase().as_str());
    let first_value_col = usize::from(has_ids);
    let names: Vec<String> = headers.iter().skip(first_value_col).map(str::to_string).collect();
    if names.is_empty() {
        return Err(Error::Parse {
            line: 1,
            column: 1,
            message: "no covariate columns".into(),
        });
    }

    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| csv_error(&e, line))?;
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        if rec.len() != headers.len() {
            return Err(Error::Parse {
                line,
                column: rec.len().min(headers.len()) + 1,
                message: format!("expected {} fields, found {}", headers.len(), rec.len()),
            });
        }
        if has_ids {
            ids.push(rec[0].to_string());
        }
        let row = rec
            .iter()
            .enumerate()
            .skip(first_value_col)
            .map(|(c, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::NonNumericCell {
                        line,
                        column: c + 1,
                        value: cell.to_string(),
                    })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let matrix = CovariateMatrix::new(names, rows)?;
    Ok(Dataset {
        ids: has_ids.then_some(ids),
        matrix,
    })
}

fn csv_error(e: &csv::Error, line: usize) -> Error {
    let line = e.position().map_or(line, |p| p.line() as usize);
    Error::Parse {
        line,
        column: 0,
        message: e.to_string(),
    }
}
