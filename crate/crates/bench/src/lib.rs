//! Fixtures shared by the benchmarks.

use turnover_core::factor_model::ClusterSpec;
use turnover_core::panel::pairwise_correlation;
use turnover_core::synth::gen_panel;
use turnover_core::{AlphaPanel, CorrelationMatrix};

/// Panel of `n` alphas in `f` roughly equal clusters with unit risks.
pub fn cluster_panel(n: usize, f: usize, n_obs: usize, seed: u64) -> AlphaPanel {
    let sizes: Vec<usize> = (0..f).map(|a| n / f + usize::from(a < n % f)).collect();
    let spec = ClusterSpec::new(sizes, vec![1.0; f], vec![1.0; f]).expect("valid cluster spec");
    gen_panel(&spec.to_model(), n_obs, seed).expect("panel generation")
}

/// Sample correlation of [`cluster_panel`].
pub fn cluster_correlation(n: usize, f: usize, n_obs: usize, seed: u64) -> CorrelationMatrix {
    pairwise_correlation(&cluster_panel(n, f, n_obs, seed), 12).expect("correlation")
}

/// Random multinomial cluster sizes summing to `n`, none empty.
pub fn multinomial_sizes(n: usize, f: usize, seed: u64) -> Vec<usize> {
    let config = turnover_core::SynthConfig {
        seed,
        n_alphas: n,
        n_clusters: f,
        size_scheme: turnover_core::synth::SizeScheme::RandomMultinomial,
        ..Default::default()
    };
    turnover_core::synth::gen_cluster_spec(&config).expect("sizes").sizes().to_vec()
}
