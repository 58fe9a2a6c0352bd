//! Estimates of the number of alpha clusters: the eigenvalue lower bound,
//! the residual-correlation sweep and its knee, and the new-cluster F-test.

mod ftest;
mod knee;
mod lower;
mod sweep;

pub use ftest::{cross_section_f_stat, new_cluster_ftest, BinaryLoadings, FTestReport, DEFAULT_WINSOR};
pub use knee::{knee_estimate, KneeEstimate, DEFAULT_REL_DROP, DEFAULT_WINDOW};
pub use lower::{lower_bound_f, lower_bound_from_psi, ClusterCountEstimate};
pub use sweep::{prepare_for_sweep, residual_correlation, residual_correlation_sweep, SweepCurve, MIN_RESIDUAL_VARIANCE};
