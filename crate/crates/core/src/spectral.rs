//! Spectral turnover-reduction coefficient from the leading principal component.
//!
//! For a correlation matrix `Ψ` with top eigenpair `(ψ₁, V₁)`,
//! `ρ* = ψ₁ |Σ_i V₁ᵢ| / N^{3/2}` and turnover is estimated as `T ≈ ρ* Σ_i τ_i |w_i|`.
//! When the top eigenvalue is degenerate, `V₁` is the normalised projection of the
//! uniform vector onto the top eigenspace, i.e. the unit vector in that space with
//! the largest `|Σ_i V_i|`.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, sym_eigen, top_vector_toward, SYMMETRY_TOL};
use crate::panel::{canonicalize_signs, CorrelationMatrix};

#[derive(Debug, Clone, Serialize)]
pub struct SpectralSummary {
    /// Largest eigenvalue `ψ⁽¹⁾`.
    pub psi1: f64,
    pub rho_star: f64,
    /// `Σ_ij Ψ_ij / N²`.
    pub rho_prime: f64,
    /// `ρ* / ρ′`; `None` when `ρ′ ≤ 0`.
    pub gamma: Option<f64>,
    /// Mean off-diagonal correlation `ρ̄`.
    pub mean_corr: f64,
    /// Unit top eigenvector, signed so that `Σ_i V_i ≥ 0`.
    pub v1: Vec<f64>,
    /// Signs applied before the eigen-solve (all `+1` when not canonicalised).
    #[serde(skip)]
    pub signs: Vec<f64>,
}

impl SpectralSummary {
    pub fn n(&self) -> usize {
        self.v1.len()
    }
}

/// Per-alpha turnovers and combination weights.
#[derive(Debug, Clone)]
pub struct TurnoverInputs {
    taus: Vec<f64>,
    weights: Vec<f64>,
}

impl TurnoverInputs {
    /// Requires `τ_i ≥ 0` and `Σ |w_i| = 1` to 1e-12.
    pub fn new(taus: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if taus.len() != weights.len() {
            return Err(Error::validation("taus and weights differ in length"));
        }
        if taus.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
            return Err(Error::validation("turnovers must be finite and non-negative"));
        }
        let total: f64 = weights.iter().map(|w| w.abs()).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::validation(format!("sum of |w_i| is {total}, expected 1")));
        }
        Ok(Self { taus, weights })
    }

    /// Equal weights `1/N`.
    pub fn equal_weights(taus: Vec<f64>) -> Result<Self> {
        let n = taus.len();
        Self::new(taus, vec![1.0 / n as f64; n])
    }

    pub fn naive_turnover(&self) -> f64 {
        self.taus.iter().zip(&self.weights).map(|(t, w)| t * w.abs()).sum()
    }
}

/// Top eigenpair diagnostics of `corr`, optionally in the canonical sign basis.
pub fn spectral_summary(corr: &CorrelationMatrix, canonicalize: bool) -> Result<SpectralSummary> {
    check_symmetric(corr.psi(), SYMMETRY_TOL)?;
    let (signs, basis) = if canonicalize {
        let (s, c) = canonicalize_signs(corr)?;
        (s.signs, c)
    } else {
        (vec![1.0; corr.n()], corr.clone())
    };
    let psi = basis.psi();
    let n = basis.n();
    let nf = n as f64;
    let eig = sym_eigen(psi);
    let uniform = DVector::from_element(n, 1.0 / nf.sqrt());
    let v1 = top_vector_toward(&eig, &uniform);
    let psi1 = eig.largest();
    let rho_star = psi1 * v1.sum().abs() / nf.powf(1.5);
    let total = psi.sum();
    let rho_prime = total / (nf * nf);
    let mean_corr = if n > 1 { (total - nf) / (nf * (nf - 1.0)) } else { 0.0 };
    let gamma = (rho_prime > 0.0).then(|| rho_star / rho_prime);
    Ok(SpectralSummary {
        psi1,
        rho_star,
        rho_prime,
        gamma,
        mean_corr,
        v1: v1.iter().copied().collect(),
        signs,
    })
}

/// `T = ρ* Σ_i τ_i |w_i|`.
pub fn turnover_estimate(summary: &SpectralSummary, inputs: &TurnoverInputs) -> Result<f64> {
    if inputs.taus.len() != summary.n() {
        return Err(Error::validation(format!(
            "{} turnovers for {} alphas",
            inputs.taus.len(),
            summary.n()
        )));
    }
    Ok(summary.rho_star * inputs.naive_turnover())
}

/// `γ = ρ* / ρ′`.
pub fn gamma_diagnostic(summary: &SpectralSummary) -> Result<f64> {
    summary.gamma.ok_or_else(|| {
        Error::validation(format!(
            "rho' = {} is not positive; canonicalise alpha signs first",
            summary.rho_prime
        ))
    })
}
