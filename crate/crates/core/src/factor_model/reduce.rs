//! Reduced `F x F` eigenproblems for binary clusters with correlated factors
//! and for general (non-binary) loadings, plus the dense `N x N` route.

use nalgebra::{DMatrix, DVector};

use super::{build_covariance, contiguous_assignment, merge_spectrum, EigenStructure, FactorModel};
use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, cholesky, degeneracy_tol, sym_eigen, SortedEigen, SYMMETRY_TOL};
use crate::spectral::{spectral_summary, SpectralSummary};

/// Binary clusters with a non-diagonal factor correlation `Ψ̂` and no specific risk.
///
/// Solves `Ψ̂′ = Q Ψ̂ Q` with `Q = diag(√N_A)`; eigenvectors of `Ψ` are
/// `V_i = χ_{G(i)} / √N_{G(i)}` (clusters laid out contiguously).
pub fn reduce_nondiagonal(sizes: &[usize], factor_corr: &DMatrix<f64>) -> Result<EigenStructure> {
    reduce_nondiagonal_assigned(&contiguous_assignment(sizes), sizes.len(), factor_corr)
}

/// [`reduce_nondiagonal`] with an explicit 0-based cluster assignment.
pub fn reduce_nondiagonal_assigned(
    assignment: &[usize],
    n_clusters: usize,
    factor_corr: &DMatrix<f64>,
) -> Result<EigenStructure> {
    let f = n_clusters;
    if factor_corr.nrows() != f || factor_corr.ncols() != f {
        return Err(Error::validation(format!("factor correlation must be {f}x{f}")));
    }
    check_symmetric(factor_corr, SYMMETRY_TOL)?;
    if (0..f).any(|a| (factor_corr[(a, a)] - 1.0).abs() > 1e-12) {
        return Err(Error::validation("factor correlation must have unit diagonal"));
    }
    if cholesky(factor_corr).is_none() {
        return Err(Error::validation("factor correlation is not positive definite"));
    }
    let mut sizes = vec![0usize; f];
    for &g in assignment {
        if g >= f {
            return Err(Error::validation("assignment refers to a missing cluster"));
        }
        sizes[g] += 1;
    }
    if sizes.contains(&0) {
        return Err(Error::validation("every cluster needs at least one alpha"));
    }
    let root: Vec<f64> = sizes.iter().map(|&s| (s as f64).sqrt()).collect();
    let reduced = DMatrix::from_fn(f, f, |a, b| root[a] * factor_corr[(a, b)] * root[b]);
    let eig = sym_eigen(&reduced);
    let n = assignment.len();
    if eig.smallest() <= 0.0 {
        return Err(Error::numerical("reduced matrix is not positive definite"));
    }
    let trace: f64 = eig.values.iter().sum();
    if (trace - n as f64).abs() > 1e-9 * n as f64 {
        return Err(Error::numerical(format!("eigenvalues sum to {trace}, expected {n}")));
    }
    let sums: Vec<f64> = (0..f).map(|k| eig.vectors.column(k).iter().zip(&root).map(|(c, r)| c * r).sum()).collect();
    let rho_star = rho_from_top(&eig, &sums, n);
    let embedded = DMatrix::from_fn(n, f, |i, k| eig.vectors[(assignment[i], k)] / root[assignment[i]]);
    let mut values: Vec<(f64, usize)> = eig.values.iter().map(|&v| (v, 1)).collect();
    values.push((0.0, n - f));
    Ok(EigenStructure {
        values: merge_spectrum(values),
        top_cluster: dominant_component(&eig),
        reduced_vectors: Some(eig.vectors),
        embedded_vectors: Some(embedded),
        rho_star,
    })
}

/// Non-binary loadings with zero specific risk.
///
/// With `Φ̃` the Cholesky factor of `Φ`, `Λ = diag(σ)⁻¹ Ω Φ̃` and the non-zero
/// eigenvalues of `Ψ` are those of `Q = ΛᵀΛ = W Z Wᵀ`, with eigenvectors
/// `V = Λ W Z^{−1/2}`.
pub fn reduce_nonbinary(model: &FactorModel) -> Result<EigenStructure> {
    let factor = cholesky(model.phi_cov()).ok_or_else(|| Error::validation("factor covariance is not positive definite"))?;
    reduce_nonbinary_with_factor(model, &factor)
}

/// [`reduce_nonbinary`] with any `Φ̃` satisfying `Φ̃ Φ̃ᵀ = Φ`.
pub fn reduce_nonbinary_with_factor(model: &FactorModel, phi_factor: &DMatrix<f64>) -> Result<EigenStructure> {
    if model.has_specific_risk() {
        return Err(Error::validation(
            "non-binary reduction needs zero specific risk; use the dense path for models with specific risk",
        ));
    }
    let f = model.n_factors();
    let rebuilt = phi_factor * phi_factor.transpose();
    if (rebuilt - model.phi_cov()).amax() > 1e-10 * model.phi_cov().amax().max(1.0) {
        return Err(Error::validation("factor does not reproduce the factor covariance"));
    }
    let omega_t = model.omega() * phi_factor;
    let n = model.n();
    let mut lambda = omega_t;
    for i in 0..n {
        let sigma = lambda.row(i).norm();
        if !(sigma > 0.0) {
            return Err(Error::validation(format!("alpha {} has zero total variance", i + 1)));
        }
        lambda.row_mut(i).scale_mut(1.0 / sigma);
    }
    let q = lambda.transpose() * &lambda;
    let eig = sym_eigen(&q);
    if eig.smallest() <= 1e-10 * eig.largest() {
        let null = eig.vectors.column(f - 1);
        let cols: Vec<String> = (0..f).filter(|&a| null[a].abs() > 1e-6).map(|a| (a + 1).to_string()).collect();
        return Err(Error::validation(format!(
            "normalised loadings are rank deficient; linearly dependent columns: {}",
            cols.join(", ")
        )));
    }
    let ones_lambda: DVector<f64> = lambda.row_sum().transpose();
    let sums: Vec<f64> = (0..f).map(|k| ones_lambda.dot(&eig.vectors.column(k)) / eig.values[k].sqrt()).collect();
    let rho_star = rho_from_top(&eig, &sums, n);
    let scale = DMatrix::from_diagonal(&DVector::from_iterator(f, eig.values.iter().map(|v| 1.0 / v.sqrt())));
    let embedded = &lambda * &eig.vectors * scale;
    let mut values: Vec<(f64, usize)> = eig.values.iter().map(|&v| (v, 1)).collect();
    values.push((0.0, n.saturating_sub(f)));
    Ok(EigenStructure {
        values: merge_spectrum(values),
        top_cluster: dominant_component(&eig),
        reduced_vectors: Some(eig.vectors),
        embedded_vectors: Some(embedded),
        rho_star,
    })
}

/// Dense route: assemble `Ψ` and take its top eigenpair in the input sign basis.
pub fn dense_rho_star(model: &FactorModel) -> Result<SpectralSummary> {
    let (_, corr) = build_covariance(model)?;
    spectral_summary(&corr, false)
}

/// All `N` eigenvalues of the assembled `Ψ` with the dense `ρ*`.
pub fn dense_eigenstructure(model: &FactorModel) -> Result<EigenStructure> {
    let (_, corr) = build_covariance(model)?;
    let summary = spectral_summary(&corr, false)?;
    let eig = sym_eigen(corr.psi());
    let top_cluster = match model.assignment() {
        Some(assign) => {
            let v = &summary.v1;
            let mut weight = vec![0.0; model.n_factors()];
            assign.iter().zip(v).for_each(|(&g, x)| weight[g] += x * x);
            argmax(&weight)
        }
        None => 0,
    };
    Ok(EigenStructure {
        values: merge_spectrum(eig.values.iter().map(|&v| (v, 1)).collect()),
        reduced_vectors: None,
        embedded_vectors: None,
        rho_star: summary.rho_star,
        top_cluster,
    })
}

/// `ψ* |Σ V*| / N^{3/2}`; a degenerate top eigenvalue uses the combination
/// with the largest `|Σ V|`, i.e. `√(Σ_k (Σ V_k)²)` over the top eigenspace.
fn rho_from_top(eig: &SortedEigen, sums: &[f64], n: usize) -> f64 {
    let top = eig.largest();
    let tol = degeneracy_tol(top);
    let zeta: f64 = eig
        .values
        .iter()
        .zip(sums)
        .take_while(|(&v, _)| top - v <= tol)
        .map(|(_, s)| s * s)
        .sum::<f64>()
        .sqrt();
    top * zeta / (n as f64).powf(1.5)
}

fn dominant_component(eig: &SortedEigen) -> usize {
    let col: Vec<f64> = eig.vectors.column(0).iter().map(|x| x.abs()).collect();
    argmax(&col)
}

fn argmax(v: &[f64]) -> usize {
    v.iter().enumerate().fold(0, |best, (i, &x)| if x > v[best] { i } else { best })
}
