use serde::Serialize;

use crate::linalg::sym_eigenvalues;
use crate::panel::CorrelationMatrix;

/// Cluster-count estimate from the spectrum (and optionally the sweep knee).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClusterCountEstimate {
    /// Largest eigenvalue `ψ*`.
    pub psi_star: f64,
    /// `N / ψ*`.
    pub lower_bound: f64,
    /// `⌈N / ψ*⌉`.
    pub lower_bound_ceil: usize,
    /// K at which the residual-correlation sweep flattens, when computed.
    pub knee: Option<usize>,
}

/// `F ≳ N / ψ*`. Informative only when the number of clusters does not exceed
/// the number of observations; deform singular inputs first.
pub fn lower_bound_f(corr: &CorrelationMatrix) -> ClusterCountEstimate {
    let psi_star = sym_eigenvalues(corr.psi())[0];
    let lower_bound = lower_bound_from_psi(corr.n(), psi_star);
    ClusterCountEstimate { psi_star, lower_bound, lower_bound_ceil: lower_bound.ceil() as usize, knee: None }
}

/// `N / ψ*` for a known top eigenvalue.
pub fn lower_bound_from_psi(n: usize, psi_star: f64) -> f64 {
    n as f64 / psi_star
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_is_uninformative() {
        let est = lower_bound_f(&CorrelationMatrix::uniform(50, 0.0).unwrap());
        assert!((est.psi_star - 1.0).abs() < 1e-12);
        assert!((est.lower_bound - 50.0).abs() < 1e-10);
    }

    #[test]
    fn uniform_bound() {
        let est = lower_bound_f(&CorrelationMatrix::uniform(8, 0.25).unwrap());
        assert!((est.lower_bound - 8.0 / 2.75).abs() < 1e-12);
        assert_eq!(est.lower_bound_ceil, 3);
    }
}
