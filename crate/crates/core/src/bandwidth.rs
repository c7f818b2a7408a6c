//! Optimal diffusion bandwidths, per-cluster estimates, their combination and
//! the Gaussian kernel baseline.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::cluster::ClusterSet;
use crate::diffusion::{
    deposit_with, integrate, Deposition, DiffusionProblem, FilterParams, LogLine, OperatorForm, Solution, SolverConfig,
};
use crate::error::{Error, Result};
use crate::fields::{diffusion_coeff_clipped, nu_field, ProjectionWorkspace, StationaryDensity, COEFF_CLIP_PERCENTILE};
use crate::grid::{ChebGrid, ScalarField};
use crate::numerics::{log_sum_exp, pairwise_sum, percentile};
use crate::pencil::EigenSample;

/// Largest natural logarithm representable as a finite `f64`.
const LN_MAX: f64 = 709.78;

#[derive(Debug, Clone, PartialEq)]
pub struct BandwidthReport {
    pub cluster: usize,
    pub t_hat: f64,
    pub eg: f64,
    pub lnorm2: f64,
    pub t_opt: f64,
    /// The optimal bandwidth could not be formed and `t_opt = t_hat`.
    pub fallback: bool,
}

pub fn write_bandwidth_reports<W: Write>(reports: &[BandwidthReport], mut w: W) -> Result<()> {
    writeln!(w, "cluster,t_hat,EG,Lnorm2,t_opt,fallback_flag")?;
    for r in reports {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.cluster, r.t_hat, r.eg, r.lnorm2, r.t_opt, r.fallback as u8
        )?;
    }
    Ok(())
}

/// A density `h` on a grid with its quadrature mass.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityEstimate {
    pub field: ScalarField,
    pub mass: f64,
    /// `(cluster, bandwidth)` pairs that produced the estimate.
    pub provenance: Vec<(usize, f64)>,
}

impl DensityEstimate {
    pub fn new(field: ScalarField, provenance: Vec<(usize, f64)>) -> Self {
        let mass = field.integral();
        Self {
            field,
            mass,
            provenance,
        }
    }

    /// The same estimate scaled to unit mass.
    pub fn renormalized(&self) -> Self {
        if self.mass > 0.0 {
            Self::new(self.field.map(|v| v / self.mass), self.provenance.clone())
        } else {
            self.clone()
        }
    }
}

/// `(t/R) sum_r sum_{h,k} Phi^2 e^{nu/t} dx dy`, returned as its logarithm.
///
/// Terms with `Phi <= 0` are skipped; an empty sum gives `-inf`.
pub fn estimate_ln_eg(phis: &[ScalarField], nus: &[ScalarField], t: f64) -> Result<f64> {
    if phis.len() != nus.len() || phis.is_empty() {
        return Err(Error::InvalidArgument("need one residual field per solution".into()));
    }
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("bandwidth must be positive, got {t}")));
    }
    let mut terms = Vec::new();
    for (phi, nu) in phis.iter().zip(nus) {
        let g = &phi.grid;
        for h in 0..g.mx() {
            for k in 0..g.my() {
                let v = phi.values[(h, k)];
                if v > 0.0 {
                    terms.push(2.0 * v.ln() + nu.values[(h, k)] / t + g.cell_area(h, k).ln());
                }
            }
        }
    }
    Ok(log_sum_exp(&terms) + (t / phis.len() as f64).ln())
}

/// Sample estimate of `E[G]` at bandwidth `t`.
pub fn estimate_eg(phis: &[ScalarField], nus: &[ScalarField], t: f64) -> Result<f64> {
    let ln = estimate_ln_eg(phis, nus, t)?;
    if ln > LN_MAX {
        let (replicate, h, k) = largest_eg_term(phis, nus, t);
        return Err(Error::EstimatorOverflow { replicate, h, k });
    }
    Ok(ln.exp())
}

fn largest_eg_term(phis: &[ScalarField], nus: &[ScalarField], t: f64) -> (usize, usize, usize) {
    let mut best = (0, 0, 0);
    let mut top = f64::NEG_INFINITY;
    for (r, (phi, nu)) in phis.iter().zip(nus).enumerate() {
        for h in 0..phi.grid.mx() {
            for k in 0..phi.grid.my() {
                let v = phi.values[(h, k)];
                if v > 0.0 {
                    let term = 2.0 * v.ln() + nu.values[(h, k)] / t + phi.grid.cell_area(h, k).ln();
                    if term > top {
                        top = term;
                        best = (r, h, k);
                    }
                }
            }
        }
    }
    best
}

/// `(1/R) sum_r sum_{h,k} (dPhi/dt)^2 dx dy`.
pub fn estimate_lnorm2(rates: &[ScalarField]) -> f64 {
    if rates.is_empty() {
        return 0.0;
    }
    let per: Vec<f64> = rates.iter().map(|d| d.map(|v| v * v).integral()).collect();
    pairwise_sum(&per) / rates.len() as f64
}

/// Minimizer `(EG / (4 R Lnorm2))^{1/3}` of `t^2 Lnorm2 + EG / (2 R t)`.
pub fn optimal_t(eg: f64, lnorm2: f64, r: usize) -> Result<f64> {
    if !(eg > 0.0 && lnorm2 > 0.0 && eg.is_finite() && lnorm2.is_finite()) || r == 0 {
        return Err(Error::NonPositiveBandwidth { eg, lnorm2 });
    }
    let t = (eg / (4.0 * r as f64 * lnorm2)).cbrt();
    if !(t > 0.0) || !t.is_finite() {
        return Err(Error::NonPositiveBandwidth { eg, lnorm2 });
    }
    Ok(t)
}

/// Knobs for the per-cluster estimator.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorSettings {
    pub solver: SolverConfig,
    pub form: OperatorForm,
    /// Start each replicate's problem from its own eigenvalue only.
    pub per_point_delta: bool,
    pub deposition: Deposition,
    /// Number of bandwidth updates after the pilot (one by default).
    pub updates: usize,
    /// Percentile of the grid values above which the diffusion coefficient is clipped.
    pub clip_percentile: f64,
}

impl Default for EstimatorSettings {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            form: OperatorForm::Divergence,
            per_point_delta: false,
            deposition: Deposition::NearestNode,
            updates: 1,
            clip_percentile: COEFF_CLIP_PERCENTILE,
        }
    }
}

/// Everything a cluster estimate needs, shared read-only across replicates.
#[derive(Debug, Clone, Copy)]
pub struct ClusterContext<'a> {
    pub clusters: &'a ClusterSet,
    pub samples: &'a [EigenSample],
    pub s_hat: &'a [Complex64],
    pub grid: &'a Arc<ChebGrid>,
    pub p: &'a StationaryDensity,
    pub filter: &'a FilterParams,
    pub settings: &'a EstimatorSettings,
}

/// Eigenvalues of replicate `r` kept fixed when slot `j` moves over the grid.
pub fn fixed_nodes(ctx: &ClusterContext<'_>, j: usize, r: usize) -> Vec<Complex64> {
    let rep = ctx.clusters.members[j][r];
    let Some(sample) = ctx.samples.iter().find(|s| s.replicate_id == r) else {
        return Vec::new();
    };
    let finite: Vec<Complex64> = sample.finite().collect();
    let drop = finite
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - rep.z).norm_sqr().total_cmp(&(b.1 - rep.z).norm_sqr()))
        .map(|(i, _)| i);
    finite
        .into_iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != drop)
        .map(|(_, z)| z)
        .collect()
}

/// Residual field and diffusion problem of one (cluster, replicate) pair.
pub fn replicate_problem(ctx: &ClusterContext<'_>, j: usize, r: usize) -> Result<(DiffusionProblem, ScalarField)> {
    let ws = ProjectionWorkspace::new(ctx.s_hat, &fixed_nodes(ctx, j, r));
    let nu = nu_field(&ws, ctx.grid);
    let a = diffusion_coeff_clipped(ctx.p, &nu, &nu.gradient(), ctx.settings.clip_percentile);
    let members = &ctx.clusters.members[j];
    let points: Vec<Complex64> = if ctx.settings.per_point_delta {
        vec![members[r].z]
    } else {
        members.iter().map(|m| m.z).collect()
    };
    let weight = points.len();
    let initial = deposit_with(&points, weight, ctx.grid, ctx.p, ctx.settings.deposition)?;
    let problem = DiffusionProblem::new(a, ctx.p, ctx.filter.clone(), initial)?.with_form(ctx.settings.form);
    Ok((problem, nu))
}

fn solve_all(problems: &[DiffusionProblem], t: f64, config: &SolverConfig, j: usize) -> Result<Vec<Solution>> {
    problems
        .par_iter()
        .enumerate()
        .map(|(r, prob)| integrate(prob, t, config).map_err(|e| e.for_job(j, r)))
        .collect()
}

/// Pilot integration to `t_hat`, bandwidth update(s), final integration and
/// averaging over replicates.
pub fn run_cluster_estimate(ctx: &ClusterContext<'_>, j: usize) -> Result<(DensityEstimate, BandwidthReport)> {
    run_cluster_estimate_logged(ctx, j).map(|(e, r, _)| (e, r))
}

/// As [`run_cluster_estimate`], also returning the per-replicate solver logs
/// of the final pass (empty unless the solver records them).
pub fn run_cluster_estimate_logged(
    ctx: &ClusterContext<'_>,
    j: usize,
) -> Result<(DensityEstimate, BandwidthReport, Vec<Vec<LogLine>>)> {
    let replicates = ctx.clusters.members[j].len();
    let built: Vec<(DiffusionProblem, ScalarField)> = (0..replicates)
        .into_par_iter()
        .map(|r| replicate_problem(ctx, j, r).map_err(|e| e.for_job(j, r)))
        .collect::<Result<_>>()?;
    let (problems, nus): (Vec<_>, Vec<_>) = built.into_iter().unzip();

    let t_hat = ctx.clusters.variances[j];
    let mut t = t_hat;
    let mut solutions = solve_all(&problems, t, &ctx.settings.solver, j)?;
    let mut report = BandwidthReport {
        cluster: j,
        t_hat,
        eg: f64::NAN,
        lnorm2: f64::NAN,
        t_opt: t_hat,
        fallback: false,
    };
    for _ in 0..ctx.settings.updates.max(1) {
        let phis: Vec<ScalarField> = solutions.iter().map(|s| s.phi.clone()).collect();
        let rates: Vec<ScalarField> = solutions.iter().map(|s| s.dphi_dt.clone()).collect();
        report.lnorm2 = estimate_lnorm2(&rates);
        report.eg = match estimate_eg(&phis, &nus, t) {
            Ok(v) => v,
            Err(Error::EstimatorOverflow { .. }) => f64::INFINITY,
            Err(e) => return Err(e.for_job(j, 0)),
        };
        match optimal_t(report.eg, report.lnorm2, replicates) {
            Ok(next) => {
                report.t_opt = next;
                report.fallback = false;
                if next == t {
                    break;
                }
                t = next;
                solutions = solve_all(&problems, t, &ctx.settings.solver, j)?;
            }
            Err(_) => {
                report.fallback = true;
                report.t_opt = t;
                break;
            }
        }
    }

    let r = replicates as f64;
    let mut mean = DMatrix::zeros(ctx.grid.mx(), ctx.grid.my());
    for s in &solutions {
        mean += &s.phi.values;
    }
    mean /= r;
    let field = ScalarField {
        grid: ctx.grid.clone(),
        values: mean.component_mul(&ctx.p.field.values),
    };
    let logs = solutions.into_iter().map(|s| s.log).collect();
    Ok((DensityEstimate::new(field, vec![(j, report.t_opt)]), report, logs))
}

/// `sum_j w_j h_j` without clamping.
pub fn combine_raw(estimates: &[DensityEstimate], weights: &[f64]) -> Result<DensityEstimate> {
    let first = estimates
        .first()
        .ok_or_else(|| Error::InvalidArgument("nothing to combine".into()))?;
    if weights.len() != estimates.len() {
        return Err(Error::InvalidArgument("one weight per estimate required".into()));
    }
    let mut values = DMatrix::zeros(first.field.values.nrows(), first.field.values.ncols());
    let mut provenance = Vec::new();
    for (e, w) in estimates.iter().zip(weights) {
        values += &e.field.values * *w;
        provenance.extend_from_slice(&e.provenance);
    }
    Ok(DensityEstimate::new(first.field.with_values(values), provenance))
}

/// Weighted sum with weight `2/n` per cluster, negatives clamped to zero.
pub fn combine(estimates: &[DensityEstimate], n: usize) -> Result<DensityEstimate> {
    let w = vec![2.0 / n as f64; estimates.len()];
    let raw = combine_raw(estimates, &w)?;
    Ok(DensityEstimate::new(raw.field.map(|v| v.max(0.0)), raw.provenance))
}

fn axis_bandwidth(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let iqr = (percentile(values, 75.0) - percentile(values, 25.0)) / 1.349;
    let spread = if iqr > 0.0 { sd.min(iqr) } else { sd };
    if spread <= 1e-12 * (1.0 + mean.abs()) {
        return 0.0;
    }
    spread * n.powf(-1.0 / 6.0)
}

/// Per-axis bandwidths of the Gaussian baseline: normal reference for two
/// dimensions, with the spread guarded by the interquartile range.
pub fn baseline_bandwidths(points: &[Complex64]) -> Result<(f64, f64)> {
    if points.len() < 2 {
        return Err(Error::DegenerateSample);
    }
    let xs: Vec<f64> = points.iter().map(|z| z.re).collect();
    let ys: Vec<f64> = points.iter().map(|z| z.im).collect();
    let (bx, by) = (axis_bandwidth(&xs), axis_bandwidth(&ys));
    match (bx > 0.0, by > 0.0) {
        (true, true) => Ok((bx, by)),
        (true, false) => Ok((bx, bx)),
        (false, true) => Ok((by, by)),
        (false, false) => Err(Error::DegenerateSample),
    }
}

/// Product Gaussian kernel density estimate of the points on the grid.
pub fn gaussian_baseline(points: &[Complex64], grid: &Arc<ChebGrid>) -> Result<DensityEstimate> {
    let (bx, by) = baseline_bandwidths(points)?;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * bx * by * points.len() as f64);
    let kx = DMatrix::from_fn(grid.mx(), points.len(), |h, i| {
        (-0.5 * ((grid.x.nodes[h] - points[i].re) / bx).powi(2)).exp()
    });
    let ky = DMatrix::from_fn(grid.my(), points.len(), |k, i| {
        (-0.5 * ((grid.y.nodes[k] - points[i].im) / by).powi(2)).exp()
    });
    let values = (kx * ky.transpose()) * norm;
    Ok(DensityEstimate::new(
        ScalarField {
            grid: grid.clone(),
            values,
        },
        Vec::new(),
    ))
}
