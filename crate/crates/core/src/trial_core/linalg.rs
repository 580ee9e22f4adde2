use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-10;
const CLAMP_TOL: f64 = 1e-6;

/// Principal square root of a symmetric positive semidefinite matrix.
///
/// Eigenvalues in `[-1e-6, 0)` are treated as round-off and clamped to zero.
pub fn symmetric_sqrt(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !s.is_square() {
        return Err(Error::DimensionMismatch {
            expected: s.nrows(),
            found: s.ncols(),
        });
    }
    let asym = (s - s.transpose()).amax();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(s.clone());
    if let Some(&worst) = eig.eigenvalues.iter().find(|&&l| l < -CLAMP_TOL) {
        return Err(Error::NotPsd(worst));
    }
    let roots = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
    );
    let q = &eig.eigenvectors;
    let r = q * DMatrix::from_diagonal(&roots) * q.transpose();
    // symmetrize away the round-off of the triple product
    Ok((&r + r.transpose()) * 0.5)
}

/// Mean vector and covariance matrix (divisor `t`, not `t - 1`) of the rows.
pub fn empirical_moments<'a>(rows: impl IntoIterator<Item = &'a [f64]>, p: usize) -> (Vec<f64>, DMatrix<f64>) {
    let rows: Vec<&[f64]> = rows.into_iter().collect();
    assert!(!rows.is_empty(), "empirical moments of zero subjects");
    let t = rows.len() as f64;
    let mut mean = vec![0.0; p];
    for r in &rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= t;
    }
    let mut cov = DMatrix::zeros(p, p);
    for r in &rows {
        for a in 0..p {
            let da = r[a] - mean[a];
            for b in a..p {
                cov[(a, b)] += da * (r[b] - mean[b]);
            }
        }
    }
    for a in 0..p {
        for b in a..p {
            let v = cov[(a, b)] / t;
            cov[(a, b)] = v;
            cov[(b, a)] = v;
        }
    }
    (mean, cov)
}
