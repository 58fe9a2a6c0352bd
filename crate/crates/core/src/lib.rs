//! Spectral and factor-model estimates of turnover reduction across `N` alpha
//! streams.
//!
//! * [`panel`]: alpha return panels, pairwise correlations under missing data,
//!   factor regression, sign canonicalisation and correlation repair.
//! * [`spectral`]: `ρ* = ψ⁽¹⁾ |Σ V⁽¹⁾| / N^{3/2}` and the turnover estimate.
//! * [`factor_model`]: `Γ = Ξ + ΩΦΩᵀ`, closed-form and reduced eigenstructures,
//!   the secular equation and the non-binary bound.
//! * [`clusters`]: cluster-count lower bound, residual-correlation sweep, knee
//!   detection and the new-cluster F-test.
//! * [`synth`]: seeded synthetic models and panels.
//! * [`analysis`]: the end-to-end pipeline used by the command-line tool.

// `!(x > 0.0)` deliberately rejects NaN along with non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod clusters;
pub mod error;
pub mod factor_model;
pub mod format;
pub mod linalg;
pub mod panel;
pub mod spectral;
pub mod synth;

pub use analysis::{analyze_correlation, analyze_panel, AnalysisOptions, AnalysisReport};
pub use clusters::{ClusterCountEstimate, FTestReport, SweepCurve};
pub use error::{Error, Result};
pub use factor_model::{AllocationPlan, ClusterSpec, EigenStructure, FactorModel, Loadings, NonbinaryBound};
pub use panel::{AlphaPanel, CorrelationMatrix, NaPolicy, SignVector};
pub use spectral::{SpectralSummary, TurnoverInputs};
pub use synth::SynthConfig;
