//! Shared fixtures for the kernel benchmarks.

use std::sync::Arc;

use num_complex::Complex64;
use pencil_kde::config::reference_regions;
use pencil_kde::pencil::{eigensolve_replicates, pool_eigenvalues};
use pencil_kde::signal::add_noise;
use pencil_kde::{ChebGrid, EigenSample, ExponentialModel, PooledPoint, ReplicateSet, RngConfig};

/// Replicates of the reference five-component model.
pub fn reference_replicates(sigma: f64, replicates: usize) -> ReplicateSet {
    let model = ExponentialModel::reference(74, sigma).expect("reference model");
    add_noise(&model.synthesize(), sigma, replicates, &RngConfig::new(1, "bench")).expect("noise")
}

pub fn reference_samples(replicates: &ReplicateSet) -> Vec<EigenSample> {
    eigensolve_replicates(replicates).expect("eigensolve")
}

/// Grid over the second reference region.
pub fn region_grid(m: usize) -> Arc<ChebGrid> {
    ChebGrid::new(reference_regions()[1], m, m).expect("grid")
}

pub fn pooled_region(samples: &[EigenSample]) -> Vec<PooledPoint> {
    pool_eigenvalues(samples, &reference_regions()[1])
}

/// The finite eigenvalues of one replicate minus its first one.
pub fn fixed_nodes(sample: &EigenSample) -> Vec<Complex64> {
    sample.finite().skip(1).collect()
}
