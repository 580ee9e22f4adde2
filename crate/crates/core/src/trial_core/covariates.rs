//! Covariate matrices and their preprocessing: z-scoring and quantile
//! discretization into ordinal categories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major `N x p` matrix of covariate values with column labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateMatrix {
    names: Vec<String>,
    n_rows: usize,
    values: Vec<f64>,
}

impl CovariateMatrix {
    pub fn new(names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if names.is_empty() {
            return Err(Error::InvalidMatrix("at least one covariate is required".into()));
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut seen = std::collections::HashSet::new();
        for name in &names {
            if !seen.insert(name.as_str()) {
                return Err(Error::InvalidMatrix(format!("duplicate covariate name {name:?}")));
            }
        }
        let p = names.len();
        let mut values = Vec::with_capacity(rows.len() * p);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != p {
                return Err(Error::DimensionMismatch {
                    expected: p,
                    found: row.len(),
                });
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::InvalidMatrix(format!("non-finite value at row {i}, column {j}")));
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            names,
            n_rows: rows.len(),
            values,
        })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.values[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.n_cols())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n_cols() + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    /// Rows reordered by `order` (a permutation of `0..n_rows`).
    pub fn permuted(&self, order: &[usize]) -> Self {
        let rows = order.iter().map(|&i| self.row(i).to_vec()).collect();
        Self::new(self.names.clone(), rows).expect("permutation of a valid matrix is valid")
    }
}

/// Per-column affine map onto the z-scale.
///
/// A zero `sd` marks a column that was constant when the transform was fitted;
/// such columns map to 0 (only produced by [`Standardizer::fit_lenient`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

impl Standardizer {
    /// Fit on `rows`; fails with [`Error::ConstantColumn`] for a single-valued column.
    pub fn fit(matrix: &CovariateMatrix) -> Result<Self> {
        let mut means = Vec::with_capacity(matrix.n_cols());
        let mut sds = Vec::with_capacity(matrix.n_cols());
        for j in 0..matrix.n_cols() {
            let col = matrix.column(j);
            if is_constant(&col) {
                return Err(Error::ConstantColumn(j));
            }
            let (m, s) = mean_and_sd(&col);
            means.push(m);
            sds.push(s);
        }
        Ok(Self { means, sds })
    }

    /// Like [`fit`](Self::fit) but constant columns get `sd = 0` and map to 0.
    pub fn fit_lenient(rows: &[Vec<f64>], p: usize) -> Self {
        let mut means = Vec::with_capacity(p);
        let mut sds = Vec::with_capacity(p);
        for j in 0..p {
            let col: Vec<f64> = rows.iter().map(|r| r[j]).collect();
            if col.is_empty() {
                means.push(0.0);
                sds.push(0.0);
                continue;
            }
            let (m, s) = mean_and_sd(&col);
            means.push(m);
            sds.push(if is_constant(&col) { 0.0 } else { s });
        }
        Self { means, sds }
    }

    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(&v, (&m, &s))| if s > 0.0 { (v - m) / s } else { 0.0 })
            .collect()
    }

    pub fn apply_matrix(&self, matrix: &CovariateMatrix) -> CovariateMatrix {
        let rows = matrix.rows().map(|r| self.apply(r)).collect();
        CovariateMatrix::new(matrix.names().to_vec(), rows).expect("standardized matrix stays valid")
    }
}

/// Z-score every column (sample SD, `n - 1` divisor) and return the fitted transform.
pub fn standardize(matrix: &CovariateMatrix) -> Result<(CovariateMatrix, Standardizer)> {
    let transform = Standardizer::fit(matrix)?;
    Ok((transform.apply_matrix(matrix), transform))
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Category boundaries for one covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discretization {
    pub boundaries: Vec<f64>,
}

impl Discretization {
    /// Boundaries at the `1/c, ..., (c-1)/c` quantiles of `values`.
    pub fn fit(values: &[f64], c: usize) -> Result<Self> {
        if c < 2 {
            return Err(Error::BadCategoryCount(c));
        }
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let boundaries = (1..c).map(|i| quantile_sorted(&sorted, i as f64 / c as f64)).collect();
        Ok(Self { boundaries })
    }

    pub fn n_categories(&self) -> usize {
        self.boundaries.len() + 1
    }

    /// `1 + #{b : v > b}`; a value equal to a boundary stays in the lower category.
    pub fn category(&self, v: f64) -> u32 {
        1 + self.boundaries.iter().filter(|&&b| v > b).count() as u32
    }
}

/// Discretize `values` into categories `1..=c` and return the boundaries used.
pub fn discretize_quantiles(values: &[f64], c: usize) -> Result<(Vec<u32>, Vec<f64>)> {
    let d = Discretization::fit(values, c)?;
    let cats = values.iter().map(|&v| d.category(v)).collect();
    Ok((cats, d.boundaries))
}
