//! Thin helpers over nalgebra's symmetric eigensolver.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Tolerance used when checking that an input matrix is symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, sorted by descending eigenvalue.
#[derive(Debug, Clone)]
pub struct SortedEigen {
    pub values: Vec<f64>,
    /// Column `k` is the unit eigenvector for `values[k]`.
    pub vectors: DMatrix<f64>,
}

impl SortedEigen {
    pub fn largest(&self) -> f64 {
        self.values[0]
    }

    pub fn smallest(&self) -> f64 {
        *self.values.last().expect("non-empty spectrum")
    }

    /// Number of eigenvalues above `rel_tol * max(largest, 0)`.
    pub fn effective_rank(&self, rel_tol: f64) -> usize {
        let floor = rel_tol * self.largest().max(0.0);
        self.values.iter().filter(|&&v| v > floor).count()
    }
}

pub fn check_symmetric(m: &DMatrix<f64>, tol: f64) -> Result<()> {
    if !m.is_square() {
        return Err(Error::validation(format!(
            "matrix is {}x{}, expected square",
            m.nrows(),
            m.ncols()
        )));
    }
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let (a, b) = (m[(i, j)], m[(j, i)]);
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::validation(format!("non-finite entry at ({i}, {j})")));
            }
            if (a - b).abs() > tol * (1.0 + a.abs().max(b.abs())) {
                return Err(Error::validation(format!(
                    "matrix is not symmetric at ({i}, {j}): {a} vs {b}"
                )));
            }
        }
    }
    Ok(())
}

/// Full eigendecomposition of a symmetric matrix, eigenvalues descending.
pub fn sym_eigen(m: &DMatrix<f64>) -> SortedEigen {
    let n = m.nrows();
    let eig = SymmetricEigen::new(m.clone());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    SortedEigen { values, vectors }
}

pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = m.clone().symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Lower-triangular Cholesky factor `L` with `L Lᵀ = m`.
pub fn cholesky(m: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.l())
}

/// Width of the band around the top eigenvalue treated as one eigenspace.
pub(crate) fn degeneracy_tol(top: f64) -> f64 {
    1e-9 * top.abs().max(1.0)
}

/// Unit vector in the top eigenspace maximising `|target · v|`.
///
/// The top eigenspace collects every eigenvalue within [`degeneracy_tol`] of
/// the largest. `target` is projected onto it and normalised; if the projection
/// vanishes the solver's leading vector is returned. The sign makes `target · v >= 0`.
pub(crate) fn top_vector_toward(eig: &SortedEigen, target: &DVector<f64>) -> DVector<f64> {
    let top = eig.largest();
    let tol = degeneracy_tol(top);
    let dim = eig.values.iter().take_while(|&&v| top - v <= tol).count();
    let mut proj = DVector::zeros(target.len());
    for k in 0..dim {
        let col = eig.vectors.column(k);
        proj += col * col.dot(target);
    }
    let norm = proj.norm();
    let mut v = if norm > 1e-12 * target.norm().max(1.0) {
        proj / norm
    } else {
        eig.vectors.column(0).into_owned()
    };
    if v.dot(target) < 0.0 {
        v.neg_mut();
    }
    v
}

/// Median of a non-empty slice; even lengths average the two middle values.
pub(crate) fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Linear-interpolation quantile (Hyndman–Fan type 7) of sorted data.
pub(crate) fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}
