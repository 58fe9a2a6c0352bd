//! End-to-end pipeline: panel → correlation → optional repair → spectral
//! summary and cluster-count lower bound.

use serde::{Deserialize, Serialize};

use crate::clusters::{lower_bound_from_psi, prepare_for_sweep};
use crate::error::Result;
use crate::panel::{pairwise_correlation, regress_out, AlphaPanel, CorrelationMatrix, DEFAULT_MIN_OVERLAP, DEFAULT_NOISE_FLOOR};
use crate::spectral::spectral_summary;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisOptions {
    pub min_overlap: usize,
    /// Repair the correlation matrix when its smallest eigenvalue is at or below the noise floor.
    pub deform: bool,
    pub noise_floor: f64,
    /// Work in the canonical sign basis.
    pub canonicalize: bool,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self { min_overlap: DEFAULT_MIN_OVERLAP, deform: false, noise_floor: DEFAULT_NOISE_FLOOR, canonicalize: true }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub n: usize,
    /// Observations in the panel; `None` when starting from a correlation matrix.
    pub n_obs: Option<usize>,
    pub psi1: f64,
    pub rho_star: f64,
    pub rho_prime: f64,
    pub gamma: Option<f64>,
    pub mean_corr: f64,
    /// `N / ψ*` and its ceiling.
    pub lower_bound: f64,
    pub lower_bound_ceil: usize,
    pub psd: bool,
    pub deformed: bool,
    /// Number of alphas whose sign was flipped by canonicalisation.
    pub signs_flipped: usize,
    pub v1: Vec<f64>,
}

/// Runs the pipeline on a panel, regressing out `factors` first when given.
/// Errors name the stage that failed.
pub fn analyze_panel(panel: &AlphaPanel, factors: Option<&AlphaPanel>, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let residual;
    let panel = match factors {
        Some(f) => {
            residual = regress_out(panel, f).map_err(|e| e.at_stage("regress-out"))?;
            &residual
        }
        None => panel,
    };
    let corr = pairwise_correlation(panel, opts.min_overlap).map_err(|e| e.at_stage("correlation"))?;
    let mut report = analyze_correlation(&corr, opts)?;
    report.n_obs = Some(panel.n_obs());
    Ok(report)
}

/// Runs the pipeline from a correlation matrix.
pub fn analyze_correlation(corr: &CorrelationMatrix, opts: &AnalysisOptions) -> Result<AnalysisReport> {
    let (corr, deformed) = if opts.deform {
        prepare_for_sweep(corr, opts.noise_floor).map_err(|e| e.at_stage("deform"))?
    } else {
        (corr.clone(), false)
    };
    let s = spectral_summary(&corr, opts.canonicalize).map_err(|e| e.at_stage("spectral"))?;
    let lower_bound = lower_bound_from_psi(corr.n(), s.psi1);
    Ok(AnalysisReport {
        n: corr.n(),
        n_obs: None,
        psi1: s.psi1,
        rho_star: s.rho_star,
        rho_prime: s.rho_prime,
        gamma: s.gamma,
        mean_corr: s.mean_corr,
        lower_bound,
        lower_bound_ceil: lower_bound.ceil() as usize,
        psd: corr.psd(),
        deformed,
        signs_flipped: s.signs.iter().filter(|&&x| x < 0.0).count(),
        v1: s.v1,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    #[test]
    fn identity_correlation() {
        let r = analyze_correlation(&CorrelationMatrix::uniform(16, 0.0).unwrap(), &AnalysisOptions::default()).unwrap();
        assert!((r.rho_star - 0.0625).abs() < 1e-12);
        assert!((r.lower_bound - 16.0).abs() < 1e-10);
        assert!(!r.deformed);
    }

    #[test]
    fn deform_flag_only_when_singular() {
        let ones = CorrelationMatrix::from_matrix(DMatrix::from_element(3, 3, 1.0)).unwrap();
        let opts = AnalysisOptions { deform: true, ..Default::default() };
        let r = analyze_correlation(&ones, &opts).unwrap();
        assert!(r.deformed && r.psd);
        assert!((r.rho_star - 1.0 / 3.0).abs() < 1e-10);
    }

    #[test]
    fn stage_named_in_errors() {
        let p = AlphaPanel::new(
            vec!["a".into(), "b".into()],
            vec!["1".into(), "2".into(), "3".into()],
            vec![vec![Some(1.0), Some(2.0)], vec![Some(2.0), Some(1.0)], vec![Some(3.0), Some(0.0)]],
        )
        .unwrap();
        let err = analyze_panel(&p, None, &AnalysisOptions::default()).unwrap_err();
        assert!(err.to_string().starts_with("correlation:"), "{err}");
    }
}
