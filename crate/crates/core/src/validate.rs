//! The acceptance suite A1–A9, runnable from tests and from the command line.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::Rng;

use crate::analytic::{cell_integral, h2_closed_form, mc_eigenvalue_counts, SnrPoint};
use crate::bandwidth::{
    gaussian_baseline, optimal_t, replicate_problem, run_cluster_estimate, ClusterContext, EstimatorSettings,
};
use crate::cluster::{kmeans, variance_floor, ClusterSet};
use crate::config::RunConfig;
use crate::diffusion::{
    csiszar_divergence, deposit_with, integrate, mass, Deposition, DiffusionProblem, FilterParams, SolverConfig,
};
use crate::error::Result;
use crate::fields::{stationary_density, ProjectionWorkspace, RadialProfile, StationaryDensity, COEFF_CLIP_PERCENTILE};
use crate::grid::{ChebGrid, Region, ScalarField};
use crate::pencil::EigenSample;
use crate::pencil::{
    build_pencil, eigensolve_replicates, generalized_eigenvalues, matched_max_error, pool_eigenvalues,
};
use crate::pilot::{pilot_density, relative_maxima, PilotConfig};
use crate::pipeline::{run_estimate, simulate};
use crate::rng::RngConfig;
use crate::signal::{ExponentialModel, NoiseConvention};

#[derive(Debug, Clone, PartialEq)]
pub struct CriterionResult {
    pub id: &'static str,
    pub passed: bool,
    /// Failures of ungated criteria do not affect the overall verdict.
    pub gated: bool,
    pub detail: String,
    pub seconds: f64,
}

impl fmt::Display for CriterionResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let verdict = match (self.passed, self.gated) {
            (true, _) => "PASS",
            (false, true) => "FAIL",
            (false, false) => "INFO",
        };
        write!(f, "{} {} ({:.1} s): {}", self.id, verdict, self.seconds, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub seed: u64,
    pub mc_trials: usize,
    /// Noise convention used by the Monte Carlo side of A1.
    pub noise: NoiseConvention,
    /// Grid size of the region-1 diffusion checks.
    pub diffusion_grid: usize,
    /// Grid size of the two-node reproduction.
    pub reproduction_grid: usize,
    /// Also run the reproduction at `sigma = 3` (reported, never gated).
    pub high_noise_run: bool,
    /// Wall-clock budget in seconds for the diffusion solves of one run.
    pub time_budget: f64,
    pub clip_percentile: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            mc_trials: 100_000,
            noise: NoiseConvention::Circular,
            diffusion_grid: 32,
            reproduction_grid: 32,
            high_noise_run: true,
            time_budget: 900.0,
            clip_percentile: COEFF_CLIP_PERCENTILE,
        }
    }
}

fn timed(id: &'static str, gated: bool, f: impl FnOnce() -> Result<(bool, String)>) -> CriterionResult {
    let start = Instant::now();
    let (passed, detail) = match f() {
        Ok(v) => v,
        Err(e) => (false, format!("error: {e}")),
    };
    CriterionResult {
        id,
        passed,
        gated,
        detail,
        seconds: start.elapsed().as_secs_f64(),
    }
}

/// Two-sample density against a Monte Carlo histogram.
pub fn a1_two_sample_density(opts: &ValidationOptions) -> CriterionResult {
    timed("A1", true, || {
        let xi = Complex64::new(-0.1, -2.0 * PI * 0.3).exp();
        let sigma = (0.1f64).sqrt();
        let point = SnrPoint::new(Complex64::new(1.0, 0.0), xi, sigma)?;
        let model = ExponentialModel::new(vec![point.c1], vec![xi], 2, sigma)?;
        let grid = ChebGrid::new(Region::new(-2.0, 2.0, -2.0, 2.0)?, 50, 50)?;
        let rng = RngConfig::new(opts.seed, "a1");
        let counts = mc_eigenvalue_counts(&model, opts.mc_trials, &grid, &rng, opts.noise)?;
        let trials = opts.mc_trials as f64;
        let mut cells = 0;
        let mut worst: f64 = 0.0;
        for h in 0..grid.mx() {
            for k in 0..grid.my() {
                let expected = trials * cell_integral(&grid, h, k, 6, |z| h2_closed_form(&point, z));
                if expected >= 200.0 {
                    cells += 1;
                    worst = worst.max((counts[(h, k)] - expected).abs() / expected);
                }
            }
        }
        Ok((
            cells > 0 && worst <= 0.15,
            format!("{cells} cells with expected count >= 200, max relative error {worst:.4} (limit 0.15)"),
        ))
    })
}

/// Noiseless pencil with `n = 2 p*` reproduces the nodes.
pub fn a2_noiseless_exactness() -> CriterionResult {
    timed("A2", true, || {
        let m = ExponentialModel::reference(10, 0.0)?;
        let e = generalized_eigenvalues(&build_pencil(&m.synthesize())?, 0)?;
        let found: Vec<Complex64> = e.finite().collect();
        let err = matched_max_error(&found, &m.nodes).unwrap_or(f64::INFINITY);
        Ok((err <= 1e-8, format!("max matched node error {err:.3e} (limit 1e-8)")))
    })
}

/// A random model with at most five well-separated nodes.
pub fn random_model<R: Rng>(g: &mut R) -> Result<ExponentialModel> {
    let p_star = g.random_range(1..=5);
    let mut nodes: Vec<Complex64> = Vec::new();
    while nodes.len() < p_star {
        let z = Complex64::from_polar(g.random_range(0.5..1.05), g.random_range(-PI..PI));
        if nodes.iter().all(|w| (w - z).norm() > 0.1) {
            nodes.push(z);
        }
    }
    let coeffs = (0..p_star)
        .map(|_| Complex64::from_polar(g.random_range(0.5..3.0), g.random_range(-PI..PI)))
        .collect();
    let n = 2 * p_star + 2 * g.random_range(0..8);
    ExponentialModel::new(coeffs, nodes, n, 0.0)
}

/// The residual vanishes at the noiseless truth.
pub fn a3_residual_at_truth(opts: &ValidationOptions) -> CriterionResult {
    timed("A3", true, || {
        let rng = RngConfig::new(opts.seed, "a3");
        let mut worst: f64 = 0.0;
        for i in 0..20u64 {
            let mut g = rng.substream(&[i]);
            let m = random_model(&mut g)?;
            let s = m.synthesize();
            let scale: f64 = s.iter().map(|v| v.norm_sqr()).sum();
            for j in 0..m.p_star() {
                let fixed: Vec<Complex64> = m
                    .nodes
                    .iter()
                    .enumerate()
                    .filter(|(h, _)| *h != j)
                    .map(|(_, z)| *z)
                    .collect();
                let nu = ProjectionWorkspace::new(&s, &fixed).nu(m.nodes[j]);
                worst = worst.max(nu / scale);
            }
        }
        Ok((
            worst <= 1e-10,
            format!("max nu / |s|^2 over 20 models: {worst:.3e} (limit 1e-10)"),
        ))
    })
}

/// Flat diffusion from a point mass against the heat kernel.
pub fn a4_heat_kernel() -> CriterionResult {
    timed("A4", true, || {
        let g = ChebGrid::new(Region::new(-6.0, 6.0, -6.0, 6.0)?, 64, 64)?;
        let p = stationary_density(&g, RadialProfile::Constant(1.0))?;
        let init = deposit_with(&[Complex64::new(0.0, 0.0)], 1, &g, &p, Deposition::LocalCubic)?;
        let a = ScalarField::from_fn(&g, |_, _| 1.0);
        let prob = DiffusionProblem::new(a, &p, FilterParams::identity(&g), init.clone())?;
        let t = 0.5;
        let sol = integrate(&prob, t, &SolverConfig::default())?;
        let peak = 1.0 / (4.0 * PI * t);
        let mut err: f64 = 0.0;
        for h in 0..g.mx() {
            for k in 0..g.my() {
                let z = g.point(h, k);
                if z.norm() <= 3.0 {
                    let exact = peak * (-z.norm_sqr() / (4.0 * t)).exp();
                    err = err.max((sol.phi.values[(h, k)] - exact).abs());
                }
            }
        }
        let rel = err / peak;
        let drift = (mass(&sol.phi, &p.field) - mass(&init, &p.field)).abs();
        Ok((
            rel <= 0.02 && drift <= 0.01,
            format!("sup error {rel:.4} of peak (limit 0.02), mass drift {drift:.2e} (limit 0.01)"),
        ))
    })
}

struct RegionOneSetup {
    clusters: ClusterSet,
    samples: Vec<EigenSample>,
    s_hat: Vec<Complex64>,
    grid: Arc<ChebGrid>,
    p: StationaryDensity,
    filter: FilterParams,
    settings: EstimatorSettings,
    j: usize,
}

impl RegionOneSetup {
    fn ctx<'a>(&'a self, settings: &'a EstimatorSettings) -> ClusterContext<'a> {
        ClusterContext {
            clusters: &self.clusters,
            samples: &self.samples,
            s_hat: &self.s_hat,
            grid: &self.grid,
            p: &self.p,
            filter: &self.filter,
            settings,
        }
    }

    fn budgeted(&self, seconds: f64) -> EstimatorSettings {
        let mut settings = self.settings.clone();
        settings.solver.deadline = Some(Instant::now() + Duration::from_secs_f64(seconds));
        settings
    }
}

fn region_one_setup(opts: &ValidationOptions) -> Result<RegionOneSetup> {
    let cfg = RunConfig {
        seed: opts.seed,
        mx: opts.diffusion_grid,
        my: opts.diffusion_grid,
        coeff_clip_percentile: opts.clip_percentile,
        ..RunConfig::default()
    };
    let reps = simulate(&cfg)?;
    let samples = eigensolve_replicates(&reps)?;
    let region = cfg.regions[0];
    let grid = ChebGrid::new(region, cfg.mx, cfg.my)?;
    let pooled = pool_eigenvalues(&samples, &region);
    let pilot_cfg = PilotConfig::for_model(cfg.model.n, cfg.model.sigma);
    let pilot = pilot_density(&reps, &grid, &pilot_cfg)?;
    let k = relative_maxima(&pilot, pilot_cfg.maxima_threshold)
        .len()
        .clamp(1, pooled.len().max(1));
    let clusters = kmeans(
        &pooled,
        k,
        reps.replicates(),
        variance_floor(&region),
        &RngConfig::new(cfg.seed, "kmeans/0"),
    )?;
    let j = (0..clusters.k).max_by_key(|&j| clusters.member_counts[j]).unwrap_or(0);
    let p = stationary_density(&grid, RadialProfile::Cauchy)?;
    let filter = FilterParams::new(&grid, cfg.gamma, cfg.phi)?;
    Ok(RegionOneSetup {
        clusters,
        samples,
        s_hat: reps.mean_signal.clone(),
        grid,
        p,
        filter,
        settings: cfg.estimator_settings(),
        j,
    })
}

/// Csiszár divergence decreases along the flow, and mass is kept at the
/// optimal bandwidth (A5 and A6 share one cluster).
pub fn a5_a6_region_one(opts: &ValidationOptions) -> (CriterionResult, CriterionResult) {
    let start = Instant::now();
    let setup = region_one_setup(opts);
    let setup_secs = start.elapsed().as_secs_f64();
    let fail = |e: &crate::Error| crate::Error::InvalidArgument(e.to_string());
    let mut a5 = timed("A5", true, || {
        let s = setup.as_ref().map_err(fail)?;
        let settings = s.budgeted(opts.time_budget);
        let (problem, _) = replicate_problem(&s.ctx(&settings), s.j, 0)?;
        let t_hat = s.clusters.variances[s.j];
        let times: Vec<f64> = (1..=6).map(|i| t_hat * i as f64 / 6.0).collect();
        let config = SolverConfig {
            snapshot_times: times,
            ..settings.solver.clone()
        };
        let sol = integrate(&problem, t_hat, &config)?;
        let d: Vec<f64> = sol
            .snapshots
            .iter()
            .map(|(_, f)| csiszar_divergence(f, &problem.p))
            .collect();
        let worst = d
            .windows(2)
            .map(|w| (w[1] - w[0]) / w[0].abs().max(f64::MIN_POSITIVE))
            .fold(f64::MIN, f64::max);
        Ok((
            d.len() >= 5 && worst <= 1e-6,
            format!(
                "cluster {}, {} divergences from {:.4e} to {:.4e}, largest relative increase {worst:.2e} (limit 1e-6)",
                s.j,
                d.len(),
                d[0],
                d[d.len() - 1]
            ),
        ))
    });
    let mut a6 = timed("A6", true, || {
        let s = setup.as_ref().map_err(fail)?;
        let settings = s.budgeted(opts.time_budget);
        let ctx = s.ctx(&settings);
        let (estimate, report) = run_cluster_estimate(&ctx, s.j)?;
        let settings = s.budgeted(opts.time_budget);
        let (problem, _) = replicate_problem(&s.ctx(&settings), s.j, 0)?;
        let sol = integrate(&problem, report.t_opt, &settings.solver)?;
        let m = mass(&sol.phi, &problem.p);
        Ok((
            (m - 1.0).abs() <= 0.02,
            format!(
                "cluster {} replicate 0 mass at t_opt = {:.4e}: {m:.5} (limit |mass - 1| <= 0.02), cluster mass {:.5}",
                s.j, report.t_opt, estimate.mass
            ),
        ))
    });
    a5.seconds += setup_secs;
    a6.seconds += setup_secs;
    (a5, a6)
}

/// Golden-section minimum of `f` on `[lo, hi]`.
fn golden_section(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..300 {
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = f(d);
        }
        if hi - lo <= 1e-13 * (lo.abs() + hi.abs()) {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Closed-form bandwidth against numeric minimization of the error bound.
pub fn a7_optimal_bandwidth(opts: &ValidationOptions) -> CriterionResult {
    timed("A7", true, || {
        let mut g = RngConfig::new(opts.seed, "a7").substream(&[]);
        let mut worst: f64 = 0.0;
        for _ in 0..100 {
            let target = 10f64.powf(g.random_range(-2.0..0.95));
            let lnorm2 = 10f64.powf(g.random_range(-3.0..3.0));
            let r = g.random_range(1..=20usize);
            let eg = 4.0 * r as f64 * lnorm2 * target.powi(3);
            let t = optimal_t(eg, lnorm2, r)?;
            let risk = |t: f64| t * t * lnorm2 + eg / (2.0 * r as f64 * t);
            let numeric = golden_section(risk, 1e-12, 10.0);
            worst = worst.max((t - numeric).abs() / numeric);
        }
        Ok((
            worst <= 1e-6,
            format!("max relative gap over 100 triples {worst:.2e} (limit 1e-6)"),
        ))
    })
}

/// Outcome of the two-node reproduction in region 2.
#[derive(Debug, Clone, PartialEq)]
pub struct ReproductionSummary {
    pub maxima: Vec<(f64, f64, f64)>,
    pub distances: Vec<f64>,
    pub passed: bool,
}

pub fn reproduction_run(opts: &ValidationOptions, sigma: f64) -> Result<ReproductionSummary> {
    let mut cfg = RunConfig {
        seed: opts.seed,
        mx: opts.reproduction_grid,
        my: opts.reproduction_grid,
        coeff_clip_percentile: opts.clip_percentile,
        time_budget: opts.time_budget,
        ..RunConfig::default()
    };
    cfg.model.sigma = sigma;
    let reps = simulate(&cfg)?;
    let out = run_estimate(&cfg, &reps, &[1])?;
    let maxima: Vec<(f64, f64, f64)> = out[0].maxima.iter().map(|m| (m.x, m.y, m.value)).collect();
    let targets = [cfg.model.nodes[2], cfg.model.nodes[3]];
    let mut distances = Vec::new();
    let mut passed = maxima.len() == 2;
    if passed {
        let z: Vec<Complex64> = maxima.iter().map(|m| Complex64::new(m.0, m.1)).collect();
        let straight = [(z[0] - targets[0]).norm(), (z[1] - targets[1]).norm()];
        let crossed = [(z[0] - targets[1]).norm(), (z[1] - targets[0]).norm()];
        let best = if straight[0].max(straight[1]) <= crossed[0].max(crossed[1]) {
            straight
        } else {
            crossed
        };
        distances = best.to_vec();
        passed = best.iter().all(|&d| d <= 0.08);
    } else {
        for m in &maxima {
            let z = Complex64::new(m.0, m.1);
            distances.push(targets.iter().map(|t| (z - t).norm()).fold(f64::INFINITY, f64::min));
        }
    }
    Ok(ReproductionSummary {
        maxima,
        distances,
        passed,
    })
}

fn describe(s: &ReproductionSummary) -> String {
    let list: Vec<String> = s
        .maxima
        .iter()
        .zip(s.distances.iter().chain(std::iter::repeat(&f64::NAN)))
        .map(|(m, d)| format!("({:.3}, {:.3}) at {:.3}", m.0, m.1, d))
        .collect();
    format!(
        "{} maxima above 0.3 of the peak [{}] (need 2, each within 0.08 of a distinct true node)",
        s.maxima.len(),
        list.join(", ")
    )
}

/// Two dominant maxima near the two close nodes of region 2.
pub fn a8_two_node_reproduction(opts: &ValidationOptions) -> Vec<CriterionResult> {
    let mut out = vec![timed("A8", true, || {
        let s = reproduction_run(opts, 1.0)?;
        Ok((s.passed, format!("sigma = 1: {}", describe(&s))))
    })];
    if opts.high_noise_run {
        out.push(timed("A8-sigma3", false, || {
            let s = reproduction_run(opts, 3.0)?;
            Ok((s.passed, format!("sigma = 3 (not gated): {}", describe(&s))))
        }));
    }
    out
}

/// Gaussian baseline normalization and mirror symmetry.
pub fn a9_baseline(opts: &ValidationOptions) -> CriterionResult {
    timed("A9", true, || {
        let mut g = RngConfig::new(opts.seed, "a9").substream(&[]);
        let normal = rand_distr::Normal::new(0.0, 0.1).expect("valid");
        let cloud: Vec<Complex64> = (0..1000)
            .map(|_| Complex64::new(0.2 + g.sample(normal), -0.1 + g.sample(normal)))
            .collect();
        let wide = ChebGrid::new(Region::new(-1.5, 1.5, -1.5, 1.5)?, 96, 96)?;
        let est = gaussian_baseline(&cloud, &wide)?;
        let mass_err = (est.mass - 1.0).abs();

        let half: Vec<Complex64> = cloud.iter().take(200).copied().collect();
        let mirrored: Vec<Complex64> = half.iter().flat_map(|z| [*z, Complex64::new(-z.re, z.im)]).collect();
        let sym = ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0)?, 33, 33)?;
        let f = gaussian_baseline(&mirrored, &sym)?.field;
        let m = sym.mx();
        let mut asym: f64 = 0.0;
        for h in 0..m {
            for k in 0..sym.my() {
                asym = asym.max((f.values[(h, k)] - f.values[(m - 1 - h, k)]).abs());
            }
        }
        Ok((
            mass_err <= 1e-3 && asym <= 1e-10,
            format!("|mass - 1| = {mass_err:.2e} (limit 1e-3), mirror asymmetry {asym:.2e} (limit 1e-10)"),
        ))
    })
}

/// Identifiers of the criteria in run order.
pub const CRITERIA: [&str; 9] = ["A1", "A2", "A3", "A4", "A5", "A6", "A7", "A8", "A9"];

/// Runs every criterion in order.
pub fn run_all(opts: &ValidationOptions) -> Vec<CriterionResult> {
    run_selected::<&str>(opts, &[])
}

/// Runs the named criteria (all of them when `ids` is empty).
pub fn run_selected<S: AsRef<str>>(opts: &ValidationOptions, ids: &[S]) -> Vec<CriterionResult> {
    let wanted = |id: &str| ids.is_empty() || ids.iter().any(|s| s.as_ref().trim().eq_ignore_ascii_case(id));
    let mut out = Vec::new();
    if wanted("A1") {
        out.push(a1_two_sample_density(opts));
    }
    if wanted("A2") {
        out.push(a2_noiseless_exactness());
    }
    if wanted("A3") {
        out.push(a3_residual_at_truth(opts));
    }
    if wanted("A4") {
        out.push(a4_heat_kernel());
    }
    if wanted("A5") || wanted("A6") {
        let (a5, a6) = a5_a6_region_one(opts);
        if wanted("A5") {
            out.push(a5);
        }
        if wanted("A6") {
            out.push(a6);
        }
    }
    if wanted("A7") {
        out.push(a7_optimal_bandwidth(opts));
    }
    if wanted("A8") {
        out.extend(a8_two_node_reproduction(opts));
    }
    if wanted("A9") {
        out.push(a9_baseline(opts));
    }
    out
}

/// True when every gated criterion passed.
pub fn overall(results: &[CriterionResult]) -> bool {
    results.iter().filter(|r| r.gated).all(|r| r.passed)
}
