//! Factor-model covariances `Γ = Ξ + Ω Φ Ωᵀ` and closed-form eigenstructures
//! of the implied correlation matrix.

mod binary;
mod bound;
mod json;
mod reduce;
mod secular;

pub use binary::{binary_eigensystem, optimal_allocation, rho_star_binary, AllocationPlan};
pub use bound::{nonbinary_bound, NonbinaryBound};
pub use reduce::{
    dense_eigenstructure, dense_rho_star, reduce_nonbinary, reduce_nonbinary_with_factor, reduce_nondiagonal,
    reduce_nondiagonal_assigned,
};
pub use secular::{
    f2_closed_form, secular_identity_check, secular_largest, secular_roots, IdentityCheck,
};

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{check_symmetric, cholesky, SYMMETRY_TOL};
use crate::panel::CorrelationMatrix;

/// Binary cluster model: each alpha belongs to exactly one of `F` clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSpec {
    sizes: Vec<usize>,
    /// 0-based cluster index per alpha.
    assignment: Vec<usize>,
    /// Factor variances `φ_A > 0`.
    phi: Vec<f64>,
    /// Per-cluster specific risk `ξ̃_A ≥ 0`.
    xi: Vec<f64>,
}

impl ClusterSpec {
    /// Clusters laid out contiguously: the first `sizes[0]` alphas form cluster 0, and so on.
    pub fn new(sizes: Vec<usize>, phi: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        let assignment = contiguous_assignment(&sizes);
        Self::with_assignment(assignment, sizes.len(), phi, xi)
    }

    /// Unit factor variances and zero specific risk.
    pub fn pure(sizes: Vec<usize>) -> Result<Self> {
        let f = sizes.len();
        Self::new(sizes, vec![1.0; f], vec![0.0; f])
    }

    /// Uniform `ζ = ξ̃²/φ` across clusters (with `φ = 1`).
    pub fn with_uniform_zeta(sizes: Vec<usize>, zeta: f64) -> Result<Self> {
        let f = sizes.len();
        Self::new(sizes, vec![1.0; f], vec![zeta.sqrt(); f])
    }

    pub fn with_assignment(assignment: Vec<usize>, n_clusters: usize, phi: Vec<f64>, xi: Vec<f64>) -> Result<Self> {
        if n_clusters == 0 {
            return Err(Error::validation("need at least one cluster"));
        }
        let mut sizes = vec![0usize; n_clusters];
        for (i, &g) in assignment.iter().enumerate() {
            if g >= n_clusters {
                return Err(Error::validation(format!("alpha {i} assigned to cluster {}, only {n_clusters} exist", g + 1)));
            }
            sizes[g] += 1;
        }
        if let Some(a) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::validation(format!("cluster {} is empty", a + 1)));
        }
        if phi.len() != n_clusters || xi.len() != n_clusters {
            return Err(Error::validation("phi and xi need one entry per cluster"));
        }
        if phi.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::validation("factor variances must be positive"));
        }
        if xi.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::validation("specific risks must be non-negative"));
        }
        Ok(Self { sizes, assignment, phi, xi })
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_clusters(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    /// `ζ_A = ξ̃²_A / φ_A`.
    pub fn zeta(&self, a: usize) -> f64 {
        self.xi[a] * self.xi[a] / self.phi[a]
    }

    /// `N* = max N_A`.
    pub fn largest_size(&self) -> usize {
        *self.sizes.iter().max().expect("at least one cluster")
    }

    /// Equivalent [`FactorModel`] with binary loadings and diagonal `Φ`.
    pub fn to_model(&self) -> FactorModel {
        let xi = self.assignment.iter().map(|&g| self.xi[g]).collect();
        FactorModel {
            loadings: Loadings::Binary { assignment: self.assignment.clone(), n_clusters: self.n_clusters() },
            phi_cov: DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.phi.clone())),
            xi,
        }
    }
}

pub(crate) fn contiguous_assignment(sizes: &[usize]) -> Vec<usize> {
    sizes.iter().enumerate().flat_map(|(a, &s)| std::iter::repeat_n(a, s)).collect()
}

/// Factor loadings: binary cluster membership or a dense `N x F` matrix.
#[derive(Debug, Clone, PartialEq)]
pub enum Loadings {
    Binary { assignment: Vec<usize>, n_clusters: usize },
    Dense(DMatrix<f64>),
}

/// `Γ = Ξ + Ω Φ Ωᵀ` with `Ξ = diag(ξ_i²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorModel {
    loadings: Loadings,
    phi_cov: DMatrix<f64>,
    xi: Vec<f64>,
}

impl FactorModel {
    pub fn new(loadings: Loadings, phi_cov: DMatrix<f64>, xi: Vec<f64>) -> Result<Self> {
        let (n, f) = match &loadings {
            Loadings::Binary { assignment, n_clusters } => {
                if let Some((i, _)) = assignment.iter().enumerate().find(|(_, &g)| g >= *n_clusters) {
                    return Err(Error::validation(format!("alpha {i} has no valid cluster")));
                }
                (assignment.len(), *n_clusters)
            }
            Loadings::Dense(omega) => (omega.nrows(), omega.ncols()),
        };
        if n == 0 || f == 0 {
            return Err(Error::validation("model needs at least one alpha and one factor"));
        }
        if phi_cov.nrows() != f || phi_cov.ncols() != f {
            return Err(Error::validation(format!("factor covariance must be {f}x{f}")));
        }
        check_symmetric(&phi_cov, SYMMETRY_TOL)?;
        if cholesky(&phi_cov).is_none() {
            return Err(Error::validation("factor covariance is not positive definite"));
        }
        if xi.len() != n {
            return Err(Error::validation(format!("{} specific risks for {n} alphas", xi.len())));
        }
        if xi.iter().any(|&x| !(x >= 0.0 && x.is_finite())) {
            return Err(Error::validation("specific risks must be non-negative"));
        }
        Ok(Self { loadings, phi_cov, xi })
    }

    /// Dense loadings with zero specific risk.
    pub fn dense(omega: DMatrix<f64>, phi_cov: DMatrix<f64>) -> Result<Self> {
        let n = omega.nrows();
        Self::new(Loadings::Dense(omega), phi_cov, vec![0.0; n])
    }

    /// Binary clusters (contiguous) with factor covariance `phi_cov` and zero specific risk.
    pub fn binary(sizes: &[usize], phi_cov: DMatrix<f64>) -> Result<Self> {
        let assignment = contiguous_assignment(sizes);
        let n = assignment.len();
        Self::new(Loadings::Binary { assignment, n_clusters: sizes.len() }, phi_cov, vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        self.xi.len()
    }

    pub fn n_factors(&self) -> usize {
        self.phi_cov.nrows()
    }

    pub fn loadings(&self) -> &Loadings {
        &self.loadings
    }

    pub fn phi_cov(&self) -> &DMatrix<f64> {
        &self.phi_cov
    }

    pub fn xi(&self) -> &[f64] {
        &self.xi
    }

    pub fn is_binary(&self) -> bool {
        matches!(self.loadings, Loadings::Binary { .. })
    }

    pub fn has_specific_risk(&self) -> bool {
        self.xi.iter().any(|&x| x != 0.0)
    }

    pub fn phi_is_diagonal(&self) -> bool {
        let f = self.n_factors();
        (0..f).all(|a| (0..f).all(|b| a == b || self.phi_cov[(a, b)] == 0.0))
    }

    /// `Ω` as an `N x F` matrix.
    pub fn omega(&self) -> DMatrix<f64> {
        match &self.loadings {
            Loadings::Dense(m) => m.clone(),
            Loadings::Binary { assignment, n_clusters } => {
                DMatrix::from_fn(assignment.len(), *n_clusters, |i, a| if assignment[i] == a { 1.0 } else { 0.0 })
            }
        }
    }

    /// Cluster sizes for binary loadings.
    pub fn sizes(&self) -> Option<Vec<usize>> {
        match &self.loadings {
            Loadings::Binary { assignment, n_clusters } => {
                let mut s = vec![0; *n_clusters];
                assignment.iter().for_each(|&g| s[g] += 1);
                Some(s)
            }
            Loadings::Dense(_) => None,
        }
    }

    pub fn assignment(&self) -> Option<&[usize]> {
        match &self.loadings {
            Loadings::Binary { assignment, .. } => Some(assignment),
            Loadings::Dense(_) => None,
        }
    }

    /// Correlation of the factors, `Φ_AB / √(Φ_AA Φ_BB)`.
    pub fn factor_correlation(&self) -> DMatrix<f64> {
        let d: Vec<f64> = (0..self.n_factors()).map(|a| self.phi_cov[(a, a)].sqrt()).collect();
        let mut m = DMatrix::from_fn(self.n_factors(), self.n_factors(), |a, b| self.phi_cov[(a, b)] / (d[a] * d[b]));
        m.fill_diagonal(1.0);
        m
    }

    /// The [`ClusterSpec`] of a binary model with diagonal `Φ` and specific
    /// risk uniform within each cluster.
    pub fn cluster_spec(&self) -> Option<ClusterSpec> {
        let Loadings::Binary { assignment, n_clusters } = &self.loadings else {
            return None;
        };
        if !self.phi_is_diagonal() {
            return None;
        }
        let mut xi = vec![f64::NAN; *n_clusters];
        for (i, &g) in assignment.iter().enumerate() {
            if xi[g].is_nan() {
                xi[g] = self.xi[i];
            } else if xi[g] != self.xi[i] {
                return None;
            }
        }
        let phi = (0..*n_clusters).map(|a| self.phi_cov[(a, a)]).collect();
        ClusterSpec::with_assignment(assignment.clone(), *n_clusters, phi, xi).ok()
    }

    /// Model JSON; see [`FactorModel::from_json`] for the schema.
    pub fn to_json(&self) -> serde_json::Value {
        json::model_to_json(self)
    }

    /// Parses model JSON. Violations report the JSON pointer of the offending node.
    ///
    /// ```json
    /// {"mode": "binary" | "dense", "sizes": [..], "assignment": [..],
    ///  "phi": [[..]] or [..], "xi": [..], "omega": [[..]]}
    /// ```
    /// `assignment` uses 1-based cluster indices; `phi` given as a vector is the
    /// diagonal of `Φ`; `xi` (per alpha) defaults to zeros.
    pub fn from_json(value: &serde_json::Value) -> Result<Self> {
        json::model_from_json(value)
    }
}

/// `Γ` and its correlation matrix `Ψ = diag(σ)⁻¹ Γ diag(σ)⁻¹` with `σ_i² = Γ_ii`.
pub fn build_covariance(model: &FactorModel) -> Result<(DMatrix<f64>, CorrelationMatrix)> {
    let omega = model.omega();
    let mut gamma = &omega * model.phi_cov() * omega.transpose();
    for (i, &x) in model.xi().iter().enumerate() {
        gamma[(i, i)] += x * x;
    }
    let n = model.n();
    let sigma: Vec<f64> = (0..n).map(|i| gamma[(i, i)].sqrt()).collect();
    if let Some(i) = sigma.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::validation(format!("alpha {} has zero total variance", i + 1)));
    }
    let mut psi = DMatrix::from_fn(n, n, |i, j| gamma[(i, j)] / (sigma[i] * sigma[j]));
    for i in 0..n {
        psi[(i, i)] = 1.0;
        for j in (i + 1)..n {
            let x = (0.5 * (psi[(i, j)] + psi[(j, i)])).clamp(-1.0, 1.0);
            psi[(i, j)] = x;
            psi[(j, i)] = x;
        }
    }
    let labels = (1..=n).map(|i| format!("a{i}")).collect();
    let corr = CorrelationMatrix::new(labels, psi, Some(sigma))?;
    Ok((gamma, corr))
}

/// One distinct eigenvalue and its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenValue {
    pub value: f64,
    pub mult: usize,
}

/// Eigenvalues of a model's correlation matrix and the implied `ρ*`.
#[derive(Debug, Clone)]
pub struct EigenStructure {
    /// Distinct eigenvalues, descending.
    pub values: Vec<EigenValue>,
    /// Reduced-space eigenvectors as columns (`χ` or `W`), descending eigenvalue order.
    pub reduced_vectors: Option<DMatrix<f64>>,
    /// The `F` non-trivial eigenvectors of `Ψ` embedded in `N` dimensions.
    pub embedded_vectors: Option<DMatrix<f64>>,
    pub rho_star: f64,
    /// 0-based cluster (or factor) dominating the top eigenvector.
    pub top_cluster: usize,
}

impl EigenStructure {
    /// Every eigenvalue repeated by multiplicity, descending.
    pub fn expanded(&self) -> Vec<f64> {
        self.values.iter().flat_map(|e| std::iter::repeat_n(e.value, e.mult)).collect()
    }

    pub fn total_multiplicity(&self) -> usize {
        self.values.iter().map(|e| e.mult).sum()
    }

    /// `Σ value · mult`.
    pub fn trace(&self) -> f64 {
        self.values.iter().map(|e| e.value * e.mult as f64).sum()
    }

    pub fn largest(&self) -> f64 {
        self.values[0].value
    }

    /// `{"values": [{"value": x, "mult": m}], "rho_star": r, "top_cluster": a}`;
    /// `top_cluster` is 1-based.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "values": self.values,
            "rho_star": self.rho_star,
            "top_cluster": self.top_cluster + 1,
        })
    }
}

/// Groups eigenvalues equal to within `1e-12 · max(1, |v|)`, descending.
pub(crate) fn merge_spectrum(mut values: Vec<(f64, usize)>) -> Vec<EigenValue> {
    values.retain(|&(_, m)| m > 0);
    values.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out: Vec<EigenValue> = Vec::new();
    for (v, m) in values {
        match out.last_mut() {
            Some(last) if (last.value - v).abs() <= 1e-12 * last.value.abs().max(1.0) => last.mult += m,
            _ => out.push(EigenValue { value: v, mult: m }),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_cluster_perfect_correlation() {
        let m = FactorModel::binary(&[2], DMatrix::identity(1, 1)).unwrap();
        let (_, c) = build_covariance(&m).unwrap();
        assert_eq!(c.psi(), &DMatrix::from_element(2, 2, 1.0));
    }

    #[test]
    fn one_cluster_with_specific_risk() {
        let spec = ClusterSpec::new(vec![4], vec![1.0], vec![1.0]).unwrap();
        let (gamma, c) = build_covariance(&spec.to_model()).unwrap();
        assert_eq!(gamma[(0, 0)], 2.0);
        assert_eq!(gamma[(0, 1)], 1.0);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if i == j { 1.0 } else { 0.5 };
                assert!((c.psi()[(i, j)] - expect).abs() < 1e-15);
            }
        }
        assert!(c.psd());
    }

    #[test]
    fn single_style_factor() {
        let omega = DMatrix::from_column_slice(4, 1, &[0.5, -2.0, 3.0, 1.5]);
        let m = FactorModel::dense(omega, DMatrix::from_element(1, 1, 2.0)).unwrap();
        let (_, c) = build_covariance(&m).unwrap();
        let s = [1.0, -1.0, 1.0, 1.0];
        for i in 0..4 {
            for j in 0..4 {
                assert!((c.psi()[(i, j)] - s[i] * s[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_variance_row_rejected() {
        let omega = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let m = FactorModel::dense(omega, DMatrix::identity(1, 1)).unwrap();
        assert!(build_covariance(&m).is_err());
    }

    #[test]
    fn cluster_spec_round_trip() {
        let spec = ClusterSpec::new(vec![2, 3], vec![1.5, 0.5], vec![0.2, 0.0]).unwrap();
        assert_eq!(spec.to_model().cluster_spec().unwrap(), spec);
    }

    #[test]
    fn merge_groups_equal_values() {
        let m = merge_spectrum(vec![(1.0, 1), (3.0, 1), (0.0, 2), (0.0, 0), (1.0 + 1e-14, 2)]);
        assert_eq!(m.len(), 3);
        assert_eq!((m[0].value, m[0].mult), (3.0, 1));
        assert_eq!(m[1].mult, 3);
        assert_eq!((m[2].value, m[2].mult), (0.0, 2));
    }
}
