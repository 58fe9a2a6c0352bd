//! Eigenvalues of the uniform-correlation reduced matrix
//! `Ψ̂′ = (1−ρ) diag(N) + ρ √N √Nᵀ` via the secular equation
//! `ρ Σ_C N_C / (ψ − (1−ρ) N_C) = 1`.

use serde::Serialize;

use crate::error::{Error, Result};

/// All `F` eigenvalues of `Ψ̂′`, descending.
///
/// `ρ = 1` is the analytic limit: one eigenvalue `N` and `F−1` zeros.
pub fn secular_roots(sizes: &[usize], rho: f64) -> Result<Vec<f64>> {
    Ok(tagged_roots(sizes, rho)?.into_iter().map(|r| r.value).collect())
}

/// The largest root `ψ̂*(ρ)`.
pub fn secular_largest(sizes: &[usize], rho: f64) -> Result<f64> {
    Ok(tagged_roots(sizes, rho)?[0].value)
}

/// `½[N₁+N₂ ± √((N₁−N₂)² + 4N₁N₂ρ²)]` as `(larger, smaller)`.
pub fn f2_closed_form(n1: usize, n2: usize, rho: f64) -> (f64, f64) {
    let (a, b) = (n1 as f64, n2 as f64);
    let disc = ((a - b).powi(2) + 4.0 * a * b * rho * rho).sqrt();
    let hi = 0.5 * (a + b + disc);
    // product of roots is (1−ρ²) N₁ N₂; avoids cancellation in the smaller one
    let lo = if hi > 0.0 { (1.0 - rho * rho) * a * b / hi } else { 0.0 };
    (hi, lo)
}

#[derive(Debug, Clone, Copy)]
struct Root {
    value: f64,
    /// Index of the bracketing interval for simple roots; `None` for roots sitting on a pole.
    interval: Option<usize>,
}

fn validate(sizes: &[usize], rho: f64) -> Result<()> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::validation("cluster sizes must be positive"));
    }
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::validation(format!("factor correlation {rho} is outside [0, 1)")));
    }
    Ok(())
}

fn tagged_roots(sizes: &[usize], rho: f64) -> Result<Vec<Root>> {
    validate(sizes, rho)?;
    let n: usize = sizes.iter().sum();
    let f = sizes.len();
    if rho == 1.0 {
        let mut out = vec![Root { value: n as f64, interval: None }];
        out.extend(std::iter::repeat_n(Root { value: 0.0, interval: None }, f - 1));
        return Ok(out);
    }
    let mut distinct: Vec<(usize, usize)> = Vec::new();
    let mut sorted = sizes.to_vec();
    sorted.sort_unstable();
    for s in sorted {
        match distinct.last_mut() {
            Some((v, m)) if *v == s => *m += 1,
            _ => distinct.push((s, 1)),
        }
    }
    let scale = 1.0 - rho;
    let mut roots = Vec::with_capacity(f);
    for &(s, m) in &distinct {
        roots.extend(std::iter::repeat_n(Root { value: scale * s as f64, interval: None }, m - 1));
    }
    if rho == 0.0 {
        for (k, &(s, _)) in distinct.iter().enumerate() {
            roots.push(Root { value: s as f64, interval: Some(k) });
        }
    } else {
        let poles: Vec<f64> = distinct.iter().map(|&(s, _)| scale * s as f64).collect();
        let weights: Vec<f64> = distinct.iter().map(|&(s, m)| (s * m) as f64).collect();
        let g = |psi: f64| rho * poles.iter().zip(&weights).map(|(p, w)| w / (psi - p)).sum::<f64>() - 1.0;
        for k in 0..poles.len() {
            let lo_pole = poles[k];
            let hi_end = if k + 1 < poles.len() { poles[k + 1] } else { n as f64 * (1.0 + rho) };
            let gap = hi_end - lo_pole;
            let mut lo = lo_pole + 1e-13 * gap;
            let mut hi = if k + 1 < poles.len() { hi_end - 1e-13 * gap } else { hi_end };
            if g(lo) < 0.0 {
                // root is squeezed against the pole below
                roots.push(Root { value: lo, interval: Some(k) });
                continue;
            }
            if g(hi) > 0.0 {
                roots.push(Root { value: hi, interval: Some(k) });
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if g(mid) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            roots.push(Root { value: 0.5 * (lo + hi), interval: Some(k) });
        }
    }
    roots.sort_by(|a, b| b.value.total_cmp(&a.value));
    let total: f64 = roots.iter().map(|r| r.value).sum();
    if (total - n as f64).abs() > 1e-9 * (n as f64).max(1.0) {
        return Err(Error::numerical(format!("secular roots sum to {total}, expected {n}")));
    }
    Ok(roots)
}

/// One row of [`secular_identity_check`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IdentityCheck {
    pub psi: f64,
    /// `(Σ_B √N_B χ_B)²` from the normalised eigenvector; `None` for a degenerate root.
    pub chi_tilde_sq: Option<f64>,
    /// `ψ + (1−ρ) ∂ψ/∂ρ` by central differences; `None` for a degenerate root.
    pub rhs: Option<f64>,
    pub discrepancy: Option<f64>,
}

impl IdentityCheck {
    pub fn skipped(&self) -> bool {
        self.discrepancy.is_none()
    }
}

/// Checks `(χ̃)² = ψ + (1−ρ) ∂ψ/∂ρ` for every simple root, descending.
pub fn secular_identity_check(sizes: &[usize], rho: f64, step: f64) -> Result<Vec<IdentityCheck>> {
    if !(step > 0.0) || rho - step <= 0.0 || rho + step >= 1.0 {
        return Err(Error::validation("rho ± step must lie inside (0, 1)"));
    }
    let centre = tagged_roots(sizes, rho)?;
    let up = tagged_roots(sizes, rho + step)?;
    let down = tagged_roots(sizes, rho - step)?;
    let find = |roots: &[Root], k: usize| roots.iter().find(|r| r.interval == Some(k)).map(|r| r.value);
    let pole = |s: usize| (1.0 - rho) * s as f64;
    Ok(centre
        .iter()
        .map(|r| {
            let Some(k) = r.interval else {
                return IdentityCheck { psi: r.value, chi_tilde_sq: None, rhs: None, discrepancy: None };
            };
            let psi = r.value;
            let chi: Vec<f64> = sizes.iter().map(|&s| (s as f64).sqrt() / (psi - pole(s))).collect();
            let norm = chi.iter().map(|c| c * c).sum::<f64>().sqrt();
            let chi_tilde: f64 = sizes.iter().zip(&chi).map(|(&s, c)| (s as f64).sqrt() * c / norm).sum();
            let (Some(a), Some(b)) = (find(&up, k), find(&down, k)) else {
                return IdentityCheck { psi, chi_tilde_sq: None, rhs: None, discrepancy: None };
            };
            let rhs = psi + (1.0 - rho) * (a - b) / (2.0 * step);
            let lhs = chi_tilde * chi_tilde;
            IdentityCheck { psi, chi_tilde_sq: Some(lhs), rhs: Some(rhs), discrepancy: Some((lhs - rhs).abs()) }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f2_matches_closed_form() {
        let roots = secular_roots(&[3, 1], 0.5).unwrap();
        let (hi, lo) = f2_closed_form(3, 1, 0.5);
        assert!((roots[0] - hi).abs() < 1e-12);
        assert!((roots[1] - lo).abs() < 1e-12);
        assert!((hi - 0.5 * (4.0 + 7f64.sqrt())).abs() < 1e-14);
    }

    #[test]
    fn zero_rho_returns_sizes() {
        assert_eq!(secular_roots(&[2, 5, 3], 0.0).unwrap(), vec![5.0, 3.0, 2.0]);
    }

    #[test]
    fn unit_rho_limit() {
        assert_eq!(secular_roots(&[2, 5, 3], 1.0).unwrap(), vec![10.0, 0.0, 0.0]);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(secular_roots(&[2, 2], -0.1).is_err());
        assert!(secular_roots(&[2, 2], 1.5).is_err());
        assert!(secular_roots(&[2, 2], f64::NAN).is_err());
    }

    #[test]
    fn duplicate_pole_exact() {
        let roots = secular_roots(&[2, 2, 1], 0.3).unwrap();
        assert_eq!(roots.len(), 3);
        assert!(roots.contains(&(0.7 * 2.0)));
        assert!((roots.iter().sum::<f64>() - 5.0).abs() < 1e-12);
    }

    #[test]
    fn identity_holds_and_skips_degenerate() {
        let rows = secular_identity_check(&[3, 1], 0.5, 1e-5).unwrap();
        assert!(rows.iter().all(|r| r.discrepancy.unwrap() < 1e-5));
        let rows = secular_identity_check(&[2, 2, 1], 0.3, 1e-5).unwrap();
        assert_eq!(rows.iter().filter(|r| r.skipped()).count(), 1);
    }

    #[test]
    fn largest_increasing_in_rho() {
        let mut prev = 0.0;
        for k in 1..10 {
            let v = secular_largest(&[5, 3, 2], k as f64 / 10.0).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }
}
