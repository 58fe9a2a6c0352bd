use nalgebra::{DMatrix, DVector};

use super::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::linalg::sym_eigen;

/// Default relative noise floor: eigenvalues at or below `1e-10 * λ_max` count as zero.
pub const DEFAULT_NOISE_FLOOR: f64 = 1e-10;

/// Repairs a singular or indefinite correlation matrix.
///
/// Every eigenvalue at or below `noise_floor * λ_max` is replaced by the
/// smallest eigenvalue above that threshold, the matrix is rebuilt from the
/// eigenbasis, and rows/columns are rescaled so the diagonal is exactly 1.
/// A matrix with no eigenvalue at or below the threshold is returned unchanged.
pub fn deform_correlation(corr: &CorrelationMatrix, noise_floor: f64) -> Result<CorrelationMatrix> {
    if !(0.0..1.0).contains(&noise_floor) {
        return Err(Error::validation(format!("noise floor {noise_floor} must lie in [0, 1)")));
    }
    let eig = sym_eigen(corr.psi());
    let top = eig.largest();
    if !(top > 0.0) {
        return Err(Error::validation("no eigenvalue above the noise floor; cannot deform"));
    }
    let threshold = noise_floor * top;
    let replacement = eig
        .values
        .iter()
        .copied()
        .filter(|&v| v > threshold)
        .fold(f64::INFINITY, f64::min);
    if eig.values.iter().all(|&v| v > threshold) {
        return Ok(corr.clone());
    }
    let lambda = DVector::from_iterator(
        eig.values.len(),
        eig.values.iter().map(|&v| if v > threshold { v } else { replacement }),
    );
    let v = &eig.vectors;
    let rebuilt = v * DMatrix::from_diagonal(&lambda) * v.transpose();
    let n = rebuilt.nrows();
    let d: Vec<f64> = (0..n).map(|i| rebuilt[(i, i)].sqrt()).collect();
    let mut psi = DMatrix::from_fn(n, n, |i, j| rebuilt[(i, j)] / (d[i] * d[j]));
    for i in 0..n {
        psi[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let x = 0.5 * (psi[(i, j)] + psi[(j, i)]);
            psi[(i, j)] = x;
            psi[(j, i)] = x;
        }
    }
    let out = corr.with_psi(psi)?;
    if !out.psd() {
        return Err(Error::numerical("deformed matrix is not positive definite"));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::sym_eigenvalues;

    #[test]
    fn all_ones_become_identity() {
        for n in [2, 3] {
            let c = CorrelationMatrix::uniform(n, 1.0).unwrap();
            let d = deform_correlation(&c, DEFAULT_NOISE_FLOOR).unwrap();
            assert!((d.psi() - DMatrix::<f64>::identity(n, n)).amax() < 1e-12);
        }
    }

    #[test]
    fn positive_definite_input_unchanged() {
        let c = CorrelationMatrix::uniform(5, 0.3).unwrap();
        let d = deform_correlation(&c, DEFAULT_NOISE_FLOOR).unwrap();
        assert!((d.psi() - c.psi()).amax() < 1e-12);
    }

    #[test]
    fn indefinite_repaired_and_idempotent() {
        // pairwise-NA style indefinite matrix
        let m = DMatrix::from_row_slice(3, 3, &[1.0, 0.9, -0.9, 0.9, 1.0, 0.9, -0.9, 0.9, 1.0]);
        let c = CorrelationMatrix::from_matrix(m).unwrap();
        assert!(sym_eigenvalues(c.psi())[2] < 0.0);
        let d = deform_correlation(&c, DEFAULT_NOISE_FLOOR).unwrap();
        assert!(sym_eigenvalues(d.psi())[2] > 0.0);
        assert_eq!((0..3).map(|i| d.psi()[(i, i)]).collect::<Vec<_>>(), vec![1.0; 3]);
        let e = deform_correlation(&d, DEFAULT_NOISE_FLOOR).unwrap();
        assert!((e.psi() - d.psi()).amax() < 1e-10);
    }

    #[test]
    fn bad_floor_rejected() {
        let c = CorrelationMatrix::uniform(2, 0.0).unwrap();
        assert!(deform_correlation(&c, 1.0).is_err());
    }
}
