//! Library routines checked against independent hand-rolled oracles.

mod common;

use common::{jacobi_eigen, max_abs_diff, oracle_rho_star};
use nalgebra::DMatrix;
use turnover_core::factor_model::{build_covariance, nonbinary_bound, ClusterSpec, FactorModel};
use turnover_core::panel::{regress_out, AlphaPanel, CorrelationMatrix};
use turnover_core::spectral::spectral_summary;
use turnover_core::synth::{gen_factor_correlation, gen_panel, FactorCorrelation};

#[test]
fn jacobi_oracle_recovers_known_spectrum() {
    // Q diag(5, 2, 2, 0.5) Qᵀ for a fixed rotation
    let q = DMatrix::from_row_slice(4, 4, &[0.5, 0.5, 0.5, 0.5, 0.5, -0.5, 0.5, -0.5, 0.5, 0.5, -0.5, -0.5, 0.5, -0.5, -0.5, 0.5]);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![5.0, 2.0, 2.0, 0.5]));
    let m = &q * d * q.transpose();
    let (values, vectors) = jacobi_eigen(&m);
    assert!(max_abs_diff(&values, &[5.0, 2.0, 2.0, 0.5]) < 1e-13);
    assert!((vectors.transpose() * &vectors - DMatrix::<f64>::identity(4, 4)).amax() < 1e-13);
    assert!((&vectors * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(values)) * vectors.transpose() - m).amax() < 1e-12);
}

#[test]
fn oracle_rho_star_of_identity() {
    // fully degenerate: the uniform vector lies in the top eigenspace
    assert!((oracle_rho_star(&DMatrix::identity(16, 16)) - 1.0 / 16.0).abs() < 1e-15);
}

#[test]
fn spectral_summary_matches_oracle_on_random_spd() {
    for seed in 0..20 {
        let c = gen_factor_correlation(seed, 12, FactorCorrelation::RandomSpd).unwrap();
        let corr = CorrelationMatrix::from_matrix(c.clone()).unwrap();
        let s = spectral_summary(&corr, false).unwrap();
        let (values, _) = jacobi_eigen(&c);
        assert!((s.psi1 - values[0]).abs() < 1e-12);
        assert!((s.rho_star - oracle_rho_star(&c)).abs() < 1e-12);
    }
}

#[test]
fn regress_out_matches_normal_equations() {
    let f = [0.3, -1.2, 0.8, 2.0, -0.4, 1.1];
    let y1 = [1.0, -0.5, 2.2, 3.9, 0.1, 1.7];
    let y2 = [-2.0, 0.4, 0.0, 1.5, -1.1, 0.9];
    let times: Vec<String> = (1..=6).map(|t| t.to_string()).collect();
    let panel = AlphaPanel::from_matrix(
        vec!["a".into(), "b".into()],
        times.clone(),
        DMatrix::from_fn(6, 2, |t, i| if i == 0 { y1[t] } else { y2[t] }),
    )
    .unwrap();
    let factors = AlphaPanel::factors_from_matrix(vec!["f".into()], times, DMatrix::from_column_slice(6, 1, &f)).unwrap();
    let out = regress_out(&panel, &factors).unwrap();
    let fm = f.iter().sum::<f64>() / 6.0;
    let sff: f64 = f.iter().map(|x| (x - fm).powi(2)).sum();
    for (i, y) in [y1, y2].iter().enumerate() {
        let ym = y.iter().sum::<f64>() / 6.0;
        let b = f.iter().zip(y).map(|(x, v)| (x - fm) * (v - ym)).sum::<f64>() / sff;
        let a = ym - b * fm;
        for t in 0..6 {
            assert!((out.values()[(t, i)] - (y[t] - a - b * f[t])).abs() < 1e-12);
        }
    }
}

#[test]
fn generated_panel_reproduces_model_correlation() {
    let sizes = vec![3, 4, 5];
    let c = gen_factor_correlation(9, 3, FactorCorrelation::RandomSpd).unwrap();
    let model = FactorModel::binary(&sizes, c).unwrap();
    let (_, truth) = build_covariance(&model).unwrap();
    let panel = gen_panel(&model, 20_000, 4).unwrap();
    let sample = turnover_core::panel::pairwise_correlation(&panel, 12).unwrap();
    // sampling error of a correlation is at most 1/sqrt(T) ≈ 0.007
    assert!((sample.psi() - truth.psi()).amax() < 0.04);
}

#[test]
fn nonbinary_bound_on_binary_loadings() {
    for f in 2..=6 {
        let sizes = vec![5; f];
        let spec = ClusterSpec::pure(sizes.clone()).unwrap();
        let omega = spec.to_model().omega();
        let b = nonbinary_bound(&omega).unwrap();
        let (_, corr) = build_covariance(&spec.to_model()).unwrap();
        let (values, _) = jacobi_eigen(corr.psi());
        assert!((b.psi_star_est / values[0] - (2.0 - 1.0 / f as f64)).abs() < 1e-10, "F = {f}");
    }
}
