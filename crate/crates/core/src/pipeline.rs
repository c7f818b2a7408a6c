//! End-to-end estimation over the configured regions.

use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;

use crate::bandwidth::{
    combine, gaussian_baseline, run_cluster_estimate_logged, BandwidthReport, ClusterContext, DensityEstimate,
};
use crate::cluster::{kmeans, variance_floor, ClusterSet};
use crate::config::RunConfig;
use crate::diffusion::{FilterParams, LogLine};
use crate::error::{Error, Result};
use crate::fields::{stationary_density, RadialProfile};
use crate::grid::{ChebGrid, ScalarField};
use crate::pencil::{eigensolve_replicates, pool_eigenvalues, EigenSample, PooledPoint};
use crate::pilot::{pilot_density, relative_maxima, Maximum, PilotConfig};
use crate::rng::RngConfig;
use crate::signal::{add_noise_with, ReplicateSet};

/// Replicates for a configuration: simulated from the model and seed.
pub fn simulate(config: &RunConfig) -> Result<ReplicateSet> {
    let s = config.model.synthesize();
    add_noise_with(
        &s,
        config.model.sigma,
        config.replicates,
        &RngConfig::new(config.seed, "noise"),
        config.noise,
    )
}

/// Everything produced for one analysis region.
#[derive(Debug, Clone)]
pub struct RegionOutcome {
    pub index: usize,
    pub grid: Arc<ChebGrid>,
    pub pooled: Vec<PooledPoint>,
    /// Pooled eigenvalue counts per cell divided by `R p dx dy`.
    pub histogram: ScalarField,
    pub pilot: ScalarField,
    pub pilot_maxima: Vec<Maximum>,
    pub clusters: Option<ClusterSet>,
    pub reports: Vec<BandwidthReport>,
    pub cluster_estimates: Vec<DensityEstimate>,
    pub baseline: Option<DensityEstimate>,
    /// `2/n`-weighted sum of the cluster estimates.
    pub combined: Option<DensityEstimate>,
    /// `combined` scaled to unit mass over the region.
    pub combined_normalized: Option<DensityEstimate>,
    pub maxima: Vec<Maximum>,
    /// Final-pass solver logs indexed by cluster, then replicate.
    pub solver_logs: Vec<Vec<Vec<LogLine>>>,
}

fn histogram(points: &[PooledPoint], grid: &Arc<ChebGrid>, scale: f64) -> Result<ScalarField> {
    let mut counts = DMatrix::<f64>::zeros(grid.mx(), grid.my());
    for p in points {
        let (h, k) = grid.nearest_node(p.z)?;
        counts[(h, k)] += 1.0;
    }
    Ok(ScalarField {
        grid: grid.clone(),
        values: DMatrix::from_fn(grid.mx(), grid.my(), |h, k| {
            counts[(h, k)] / (scale * grid.cell_area(h, k))
        }),
    })
}

/// Pilot, clustering, per-cluster diffusion estimates and their combination
/// for one region.
pub fn estimate_region(
    config: &RunConfig,
    replicates: &ReplicateSet,
    samples: &[EigenSample],
    index: usize,
) -> Result<RegionOutcome> {
    let region = *config
        .regions
        .get(index)
        .ok_or_else(|| Error::InvalidArgument(format!("no region with index {index}")))?;
    let grid = ChebGrid::new(region, config.mx, config.my).map_err(|e| e.in_stage("grid"))?;
    let pooled = pool_eigenvalues(samples, &region);
    let r = replicates.replicates();
    let n = replicates.n();
    let hist = histogram(&pooled, &grid, (r * n / 2) as f64).map_err(|e| e.in_stage("histogram"))?;

    let pilot_cfg = PilotConfig {
        maxima_threshold: config.pilot_threshold,
        ..PilotConfig::for_model(n, replicates.sigma)
    };
    let pilot = pilot_density(replicates, &grid, &pilot_cfg).map_err(|e| e.in_stage("pilot"))?;
    let pilot_maxima = relative_maxima(&pilot, pilot_cfg.maxima_threshold);

    let mut outcome = RegionOutcome {
        index,
        grid: grid.clone(),
        pooled: pooled.clone(),
        histogram: hist,
        pilot,
        pilot_maxima: pilot_maxima.clone(),
        clusters: None,
        reports: Vec::new(),
        cluster_estimates: Vec::new(),
        baseline: None,
        combined: None,
        combined_normalized: None,
        maxima: Vec::new(),
        solver_logs: Vec::new(),
    };
    if pooled.is_empty() {
        return Ok(outcome);
    }

    if config.baseline {
        let pts: Vec<_> = pooled.iter().map(|p| p.z).collect();
        outcome.baseline = match gaussian_baseline(&pts, &grid) {
            Ok(b) => Some(b),
            Err(Error::DegenerateSample) => None,
            Err(e) => return Err(e.in_stage("baseline")),
        };
    }

    let k = pilot_maxima.len().clamp(1, pooled.len());
    let rng = RngConfig::new(config.seed, format!("kmeans/{index}"));
    let clusters = kmeans(&pooled, k, r, variance_floor(&region), &rng).map_err(|e| e.in_stage("kmeans"))?;

    let p = stationary_density(&grid, RadialProfile::Cauchy).map_err(|e| e.in_stage("stationary density"))?;
    let filter = FilterParams::new(&grid, config.gamma, config.phi).map_err(|e| e.in_stage("filter"))?;
    let mut settings = config.estimator_settings();
    if config.time_budget > 0.0 {
        settings.solver.deadline = Some(Instant::now() + Duration::from_secs_f64(config.time_budget));
    }
    let ctx = ClusterContext {
        clusters: &clusters,
        samples,
        s_hat: &replicates.mean_signal,
        grid: &grid,
        p: &p,
        filter: &filter,
        settings: &settings,
    };
    for j in 0..clusters.k {
        let (est, rep, logs) = run_cluster_estimate_logged(&ctx, j).map_err(|e| e.in_stage("diffusion"))?;
        outcome.cluster_estimates.push(est);
        outcome.reports.push(rep);
        outcome.solver_logs.push(logs);
    }
    let combined = combine(&outcome.cluster_estimates, n).map_err(|e| e.in_stage("combine"))?;
    let normalized = combined.renormalized();
    outcome.maxima = relative_maxima(&normalized.field, config.maxima_threshold);
    outcome.combined = Some(combined);
    outcome.combined_normalized = Some(normalized);
    outcome.clusters = Some(clusters);
    Ok(outcome)
}

/// Eigensolves the replicates and estimates every requested region.
pub fn run_estimate(config: &RunConfig, replicates: &ReplicateSet, regions: &[usize]) -> Result<Vec<RegionOutcome>> {
    let samples = eigensolve_replicates(replicates).map_err(|e| e.in_stage("eigensolve"))?;
    regions
        .iter()
        .map(|&i| estimate_region(config, replicates, &samples, i))
        .collect()
}
