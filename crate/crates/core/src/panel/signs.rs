use nalgebra::DMatrix;

use super::CorrelationMatrix;
use crate::error::Result;

/// Per-alpha signs chosen to raise `Σ_ij s_i s_j Ψ_ij`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignVector {
    pub signs: Vec<f64>,
    /// `Σ_ij s_i s_j Ψ_ij` at `signs`.
    pub objective: f64,
}

impl SignVector {
    pub fn flipped(&self) -> usize {
        self.signs.iter().filter(|&&s| s < 0.0).count()
    }
}

/// Greedy sign canonicalisation.
///
/// Scans indices in ascending order and flips `s_i` whenever its signed row sum
/// `Σ_{j≠i} s_i s_j Ψ_ij` is negative; stops after a pass without flips or
/// `100 N` passes. Each flip raises the objective by four times the row sum's
/// magnitude, so the objective never decreases. Returns the signs and the
/// re-signed matrix `s_i s_j Ψ_ij`.
pub fn canonicalize_signs(corr: &CorrelationMatrix) -> Result<(SignVector, CorrelationMatrix)> {
    let psi = corr.psi();
    let n = corr.n();
    let mut s = vec![1.0; n];
    // running Σ_{j≠i} s_j Ψ_ij
    let mut field: Vec<f64> = (0..n).map(|i| (0..n).filter(|&j| j != i).map(|j| psi[(i, j)]).sum()).collect();
    for _ in 0..(100 * n) {
        let mut any = false;
        for i in 0..n {
            if s[i] * field[i] < 0.0 {
                s[i] = -s[i];
                any = true;
                for j in 0..n {
                    if j != i {
                        field[j] += 2.0 * s[i] * psi[(j, i)];
                    }
                }
            }
        }
        if !any {
            break;
        }
    }
    let resigned = DMatrix::from_fn(n, n, |i, j| s[i] * s[j] * psi[(i, j)]);
    let objective = resigned.sum();
    Ok((SignVector { signs: s, objective }, corr.with_psi(resigned)?))
}
