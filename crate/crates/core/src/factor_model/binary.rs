use serde::Serialize;

use super::{merge_spectrum, ClusterSpec, EigenStructure};
use crate::error::{Error, Result};

/// Eigenvalues of the binary-cluster correlation matrix.
///
/// Cluster `A` contributes `ψ_A = (ξ̃²_A + N_A φ_A)/(ξ̃²_A + φ_A)` once and
/// `ψ̃_A = ξ̃²_A/(ξ̃²_A + φ_A)` with multiplicity `N_A − 1`. The top eigenvector
/// is the normalised indicator of the cluster chosen by [`rho_star_binary`].
pub fn binary_eigensystem(spec: &ClusterSpec) -> EigenStructure {
    let mut values = Vec::with_capacity(2 * spec.n_clusters());
    for a in 0..spec.n_clusters() {
        let (psi, psi_tilde) = cluster_eigenvalues(spec, a);
        values.push((psi, 1));
        values.push((psi_tilde, spec.sizes()[a] - 1));
    }
    let (rho_star, top_cluster) = rho_star_binary(spec);
    EigenStructure {
        values: merge_spectrum(values),
        reduced_vectors: None,
        embedded_vectors: None,
        rho_star,
        top_cluster,
    }
}

fn cluster_eigenvalues(spec: &ClusterSpec, a: usize) -> (f64, f64) {
    let xi2 = spec.xi()[a] * spec.xi()[a];
    let phi = spec.phi()[a];
    let n_a = spec.sizes()[a] as f64;
    ((xi2 + n_a * phi) / (xi2 + phi), xi2 / (xi2 + phi))
}

/// `ρ* = ψ_{A*} √N_{A*} / N^{3/2}` with `A* = argmax_A ψ_A`.
///
/// Ties in `ψ_A` go to the larger cluster, then the lower index. With zero
/// specific risk this is `(N*/N)^{3/2}`; with uniform `ζ` it is
/// `(1 + ζ/N*)/(1 + ζ) · (N*/N)^{3/2}`.
pub fn rho_star_binary(spec: &ClusterSpec) -> (f64, usize) {
    let mut best = 0;
    let mut best_psi = cluster_eigenvalues(spec, 0).0;
    for a in 1..spec.n_clusters() {
        let psi = cluster_eigenvalues(spec, a).0;
        let tie = (psi - best_psi).abs() <= 1e-12 * best_psi.abs().max(1.0);
        if (!tie && psi > best_psi) || (tie && spec.sizes()[a] > spec.sizes()[best]) {
            best = a;
            best_psi = psi;
        }
    }
    let n = spec.n() as f64;
    (best_psi * (spec.sizes()[best] as f64).sqrt() / n.powf(1.5), best)
}

/// Cluster sizes minimising `ρ*` for `N` alphas in `F` binary clusters.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AllocationPlan {
    /// Clusters of size `⌊N/F⌋`.
    pub f_minus: usize,
    /// Clusters of size `⌈N/F⌉`, `N − F⌊N/F⌋`.
    pub f_plus: usize,
    pub size_floor: usize,
    pub size_ceiling: usize,
    /// Large-`N` limit `F^{−3/2}`.
    pub rho_star_min: f64,
}

impl AllocationPlan {
    /// Sizes with the `F₊` larger clusters first.
    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![self.size_ceiling; self.f_plus];
        s.extend(std::iter::repeat_n(self.size_floor, self.f_minus));
        s
    }
}

pub fn optimal_allocation(n: usize, f: usize) -> Result<AllocationPlan> {
    if f == 0 || f > n {
        return Err(Error::validation(format!("need 1 <= F <= N, got F = {f}, N = {n}")));
    }
    let size_floor = n / f;
    let f_plus = n - f * size_floor;
    Ok(AllocationPlan {
        f_minus: f - f_plus,
        f_plus,
        size_floor,
        size_ceiling: n.div_ceil(f),
        rho_star_min: (f as f64).powf(-1.5),
    })
}
