//! Estimate of `ψ*` and `ρ*` for non-binary loadings from the demeaned
//! one-factor reduction.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonbinaryBound {
    /// Column means `λ_A` of the normalised loadings.
    pub lambda_bar: Vec<f64>,
    /// `‖λ‖₂`.
    pub chi: f64,
    /// `Tr(Q̃)/F` with `Q̃ = Λ̃ᵀΛ̃` built from column-demeaned loadings.
    pub q: f64,
    pub psi_star_est: f64,
    pub zeta_star_est: f64,
    pub rho_star_est: f64,
}

/// `Λ` is `N x F` with unit row norms (a unit-diagonal correlation).
pub fn nonbinary_bound(lambda: &DMatrix<f64>) -> Result<NonbinaryBound> {
    let (n, f) = lambda.shape();
    if n == 0 || f == 0 {
        return Err(Error::validation("loadings must be non-empty"));
    }
    if let Some(i) = (0..n).find(|&i| (lambda.row(i).norm_squared() - 1.0).abs() > 1e-8) {
        return Err(Error::validation(format!("row {} of the loadings does not have unit norm", i + 1)));
    }
    let lambda_bar: Vec<f64> = (0..f).map(|a| lambda.column(a).mean()).collect();
    let chi = lambda_bar.iter().map(|x| x * x).sum::<f64>().sqrt();
    if chi < 1e-12 {
        return Err(Error::validation(
            "mean loadings vanish; canonicalise alpha signs so row sums are non-negative",
        ));
    }
    let trace: f64 = (0..f)
        .map(|a| lambda.column(a).iter().map(|x| (x - lambda_bar[a]).powi(2)).sum::<f64>())
        .sum();
    let q = trace / f as f64;
    let nf = n as f64;
    let psi_star_est = nf * chi * chi + q;
    let zeta_star_est = nf * chi / psi_star_est.sqrt();
    let rho_star_est = chi * (psi_star_est / nf).sqrt();
    Ok(NonbinaryBound { lambda_bar, chi, q, psi_star_est, zeta_star_est, rho_star_est })
}
