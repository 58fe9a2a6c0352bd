use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::format::sig17;
use crate::linalg::{median, sym_eigen};
use crate::panel::{deform_correlation, CorrelationMatrix, PSD_REL_TOL};

/// Residual variances below this mark a K as degenerate; it is skipped.
pub const MIN_RESIDUAL_VARIANCE: f64 = 1e-10;

/// `ζ₁(K)` (mean) and `ζ₂(K)` (median) of the off-diagonal residual correlations.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct SweepCurve {
    pub ks: Vec<usize>,
    pub zeta1: Vec<f64>,
    pub zeta2: Vec<f64>,
    /// Effective rank of the input correlation matrix.
    pub rank_used: usize,
    /// K values dropped because a residual variance fell below [`MIN_RESIDUAL_VARIANCE`].
    pub skipped: Vec<usize>,
}

impl SweepCurve {
    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    /// CSV with header `K,zeta1,zeta2`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| Error::Io { path: "<sweep csv>".into(), source: e.into() };
        w.write_record(["K", "zeta1", "zeta2"]).map_err(io)?;
        for ((k, z1), z2) in self.ks.iter().zip(&self.zeta1).zip(&self.zeta2) {
            w.write_record([k.to_string(), sig17(*z1), sig17(*z2)]).map_err(io)?;
        }
        w.flush().map_err(|e| Error::Io { path: "<sweep csv>".into(), source: e })
    }
}

/// Residual correlation after regressing on the columns of `lambda`:
/// `Φ = (1−Y) Ψ (1−Y)` with `Y = Λ(ΛᵀΛ)⁻¹Λᵀ`, normalised by `ξ_i = √Φ_ii`.
/// Returns `None` when some `ξ_i² < MIN_RESIDUAL_VARIANCE`.
pub fn residual_correlation(psi: &DMatrix<f64>, lambda: &DMatrix<f64>) -> Result<Option<DMatrix<f64>>> {
    let n = psi.nrows();
    if lambda.nrows() != n {
        return Err(Error::validation("loadings and correlation matrix disagree on N"));
    }
    let gram = lambda.transpose() * lambda;
    let inv = gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::validation("loadings are rank deficient"))?
        .inverse();
    let y = lambda * inv * lambda.transpose();
    let resid = DMatrix::<f64>::identity(n, n) - y;
    let phi = &resid * psi * &resid;
    Ok(normalise(phi))
}

fn normalise(phi: DMatrix<f64>) -> Option<DMatrix<f64>> {
    let n = phi.nrows();
    let var: Vec<f64> = (0..n).map(|i| phi[(i, i)]).collect();
    if var.iter().any(|&v| v < MIN_RESIDUAL_VARIANCE) {
        return None;
    }
    let xi: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
    Some(DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { phi[(i, j)] / (xi[i] * xi[j]) }))
}

fn off_diagonal_stats(m: &DMatrix<f64>) -> (f64, f64) {
    let n = m.nrows();
    let vals: Vec<f64> = (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| m[(i, j)]).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    (mean, median(&vals))
}

/// Sweeps K = 1..=k_max with the top-K principal components as loadings.
///
/// With orthonormal components the residual covariance is
/// `Ψ − Σ_{k≤K} ψ_k v_k v_kᵀ`, updated one rank at a time.
pub fn residual_correlation_sweep(corr: &CorrelationMatrix, k_max: usize) -> Result<SweepCurve> {
    let n = corr.n();
    if k_max == 0 || k_max >= n {
        return Err(Error::validation(format!("k_max must lie in 1..{n}, got {k_max}")));
    }
    let eig = sym_eigen(corr.psi());
    if !(eig.smallest() > PSD_REL_TOL * eig.largest()) {
        return Err(Error::validation("correlation matrix is not positive definite; deform it first"));
    }
    let rank_used = eig.effective_rank(1e-10);
    if k_max >= rank_used {
        return Err(Error::validation(format!("k_max must be below the effective rank {rank_used}")));
    }
    let mut phi = corr.psi().clone();
    let mut curve = SweepCurve { ks: vec![], zeta1: vec![], zeta2: vec![], rank_used, skipped: vec![] };
    for k in 0..k_max {
        let v = eig.vectors.column(k);
        phi -= eig.values[k] * v * v.transpose();
        match normalise(phi.clone()) {
            Some(rc) => {
                let (z1, z2) = off_diagonal_stats(&rc);
                curve.ks.push(k + 1);
                curve.zeta1.push(z1);
                curve.zeta2.push(z2);
            }
            None => curve.skipped.push(k + 1),
        }
    }
    Ok(curve)
}

/// Deforms the matrix when its smallest eigenvalue is at or below
/// `noise_floor · λ_max`; the flag records whether that happened.
pub fn prepare_for_sweep(corr: &CorrelationMatrix, noise_floor: f64) -> Result<(CorrelationMatrix, bool)> {
    let values = crate::linalg::sym_eigenvalues(corr.psi());
    let (top, bottom) = (values[0], values[values.len() - 1]);
    if bottom > noise_floor * top {
        Ok((corr.clone(), false))
    } else {
        Ok((deform_correlation(corr, noise_floor)?, true))
    }
}
