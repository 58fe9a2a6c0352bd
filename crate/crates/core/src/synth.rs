//! Seeded synthetic factor models and alpha panels.
//!
//! Every random draw comes from ChaCha8 (`rand_chacha::ChaCha8Rng`) seeded with
//! `seed_from_u64(seed)`; independent quantities use separate ChaCha streams
//! (`set_stream`) so they never share draws:
//!
//! | stream | quantity |
//! |---|---|
//! | 0 | cluster sizes |
//! | 1 | factor variances and specific risks |
//! | 2 | random factor correlation |
//! | 3 | panel innovations |
//!
//! Gaussian variates are `rand_distr::StandardNormal` (ziggurat); uniform
//! variates use `rand`'s `random_range`. Outputs are therefore reproducible
//! across platforms for a given `(seed, stream)`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor_model::{optimal_allocation, ClusterSpec, FactorModel, Loadings};
use crate::linalg::cholesky;
use crate::panel::AlphaPanel;

pub const STREAM_SIZES: u64 = 0;
pub const STREAM_RISKS: u64 = 1;
pub const STREAM_FACTOR_CORR: u64 = 2;
pub const STREAM_PANEL: u64 = 3;

/// Random multinomial draws are retried this many times before giving up.
const MAX_SIZE_DRAWS: usize = 10_000;

/// ChaCha8 generator for sub-stream `stream` of `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeScheme {
    /// Floor/ceiling split of the optimal allocation.
    Equal,
    /// Each alpha picks a cluster uniformly; redrawn until no cluster is empty.
    RandomMultinomial,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactorCorrelation {
    /// Constant off-diagonal correlation in `[0, 1)`.
    Uniform(f64),
    /// Random orthogonal conjugation of positive eigenvalues, rescaled to unit diagonal.
    RandomSpd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_alphas: usize,
    pub n_clusters: usize,
    pub n_obs: usize,
    /// Factor variances are uniform on `[low, high]`.
    pub phi_range: (f64, f64),
    /// Per-cluster specific risks are uniform on `[low, high]`.
    pub xi_range: (f64, f64),
    pub factor_rho: FactorCorrelation,
    pub size_scheme: SizeScheme,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_alphas: 40,
            n_clusters: 4,
            n_obs: 1000,
            phi_range: (1.0, 1.0),
            xi_range: (1.0, 1.0),
            factor_rho: FactorCorrelation::Uniform(0.0),
            size_scheme: SizeScheme::Equal,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 || self.n_clusters > self.n_alphas {
            return Err(Error::validation(format!(
                "need 1 <= clusters <= alphas, got {} clusters for {} alphas",
                self.n_clusters, self.n_alphas
            )));
        }
        if self.n_obs < 2 {
            return Err(Error::validation("need at least 2 observations"));
        }
        let (plo, phi) = self.phi_range;
        if !(plo > 0.0 && plo <= phi && phi.is_finite()) {
            return Err(Error::validation("phi range must satisfy 0 < low <= high"));
        }
        let (xlo, xhi) = self.xi_range;
        if !(xlo >= 0.0 && xlo <= xhi && xhi.is_finite()) {
            return Err(Error::validation("xi range must satisfy 0 <= low <= high"));
        }
        if let FactorCorrelation::Uniform(rho) = self.factor_rho {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::validation(format!("factor correlation {rho} must lie in [0, 1)")));
            }
        }
        Ok(())
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

/// Cluster sizes per the scheme, then `φ_A` and `ξ̃_A` per cluster.
pub fn gen_cluster_spec(config: &SynthConfig) -> Result<ClusterSpec> {
    config.validate()?;
    let (n, f) = (config.n_alphas, config.n_clusters);
    let sizes = match config.size_scheme {
        SizeScheme::Equal => optimal_allocation(n, f)?.sizes(),
        SizeScheme::RandomMultinomial => {
            let mut rng = stream_rng(config.seed, STREAM_SIZES);
            let mut found = None;
            for _ in 0..MAX_SIZE_DRAWS {
                let mut sizes = vec![0usize; f];
                for _ in 0..n {
                    sizes[rng.random_range(0..f)] += 1;
                }
                if !sizes.contains(&0) {
                    found = Some(sizes);
                    break;
                }
            }
            found.ok_or_else(|| {
                Error::numerical(format!("no multinomial draw without empty clusters in {MAX_SIZE_DRAWS} tries"))
            })?
        }
    };
    let mut rng = stream_rng(config.seed, STREAM_RISKS);
    let phi: Vec<f64> = (0..f).map(|_| uniform(&mut rng, config.phi_range)).collect();
    let xi: Vec<f64> = (0..f).map(|_| uniform(&mut rng, config.xi_range)).collect();
    ClusterSpec::new(sizes, phi, xi)
}

/// `F x F` factor correlation matrix.
pub fn gen_factor_correlation(seed: u64, f: usize, method: FactorCorrelation) -> Result<DMatrix<f64>> {
    if f == 0 {
        return Err(Error::validation("need at least one factor"));
    }
    match method {
        FactorCorrelation::Uniform(rho) => {
            if !(0.0..1.0).contains(&rho) {
                return Err(Error::validation(format!("factor correlation {rho} must lie in [0, 1)")));
            }
            let mut m = DMatrix::from_element(f, f, rho);
            m.fill_diagonal(1.0);
            Ok(m)
        }
        FactorCorrelation::RandomSpd => {
            let mut rng = stream_rng(seed, STREAM_FACTOR_CORR);
            let g = DMatrix::from_fn(f, f, |_, _| rng.sample::<f64, _>(StandardNormal));
            let qr = g.qr();
            let (mut q, r) = (qr.q(), qr.r());
            for k in 0..f {
                if r[(k, k)] < 0.0 {
                    q.column_mut(k).neg_mut();
                }
            }
            let eig = DVector::from_fn(f, |_, _| rng.random_range(0.2..2.0));
            let m = &q * DMatrix::from_diagonal(&eig) * q.transpose();
            let d: Vec<f64> = (0..f).map(|k| m[(k, k)].sqrt()).collect();
            let mut c = DMatrix::from_fn(f, f, |a, b| m[(a, b)] / (d[a] * d[b]));
            for a in 0..f {
                c[(a, a)] = 1.0;
                for b in (a + 1)..f {
                    let x = 0.5 * (c[(a, b)] + c[(b, a)]);
                    c[(a, b)] = x;
                    c[(b, a)] = x;
                }
            }
            Ok(c)
        }
    }
}

/// Binary factor model: `Φ = D C D` with `D = diag(√φ_A)` and `C` the factor
/// correlation; every alpha in cluster A has specific risk `ξ̃_A`.
pub fn gen_model(config: &SynthConfig) -> Result<FactorModel> {
    let spec = gen_cluster_spec(config)?;
    let f = spec.n_clusters();
    let corr = gen_factor_correlation(config.seed, f, config.factor_rho)?;
    let d: Vec<f64> = spec.phi().iter().map(|p| p.sqrt()).collect();
    let phi = DMatrix::from_fn(f, f, |a, b| d[a] * corr[(a, b)] * d[b]);
    let xi = spec.assignment().iter().map(|&g| spec.xi()[g]).collect();
    FactorModel::new(
        Loadings::Binary { assignment: spec.assignment().to_vec(), n_clusters: f },
        phi,
        xi,
    )
}

/// Draws `n_obs` rows `Υ = Ω f + z` with `f ~ N(0, Φ)` and `z_i ~ N(0, ξ_i²)`.
///
/// Each row consumes `F` factor normals followed by `N` specific normals from
/// stream 3. Labels are `a1..aN` and times `1..n_obs`.
pub fn gen_panel(model: &FactorModel, n_obs: usize, seed: u64) -> Result<AlphaPanel> {
    if n_obs < 2 {
        return Err(Error::validation("need at least 2 observations"));
    }
    let l = cholesky(model.phi_cov()).ok_or_else(|| Error::validation("factor covariance is not positive definite"))?;
    let omega = model.omega();
    let (n, f) = (model.n(), model.n_factors());
    let mut rng = stream_rng(seed, STREAM_PANEL);
    let mut values = DMatrix::zeros(n_obs, n);
    let mut g = DVector::zeros(f);
    for t in 0..n_obs {
        g.iter_mut().for_each(|x| *x = rng.sample(StandardNormal));
        let factors = &l * &g;
        let common = &omega * factors;
        for i in 0..n {
            let z: f64 = rng.sample(StandardNormal);
            values[(t, i)] = common[i] + model.xi()[i] * z;
        }
    }
    let labels = (1..=n).map(|i| format!("a{i}")).collect();
    let times = (1..=n_obs).map(|t| t.to_string()).collect();
    AlphaPanel::from_matrix(labels, times, values)
}
