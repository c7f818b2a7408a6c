//! Anisotropic diffusion of the transformed density `Phi = h / p` on a
//! Chebyshev grid, integrated with an adaptive Dormand–Prince 5(4) pair.
//!
//! Spatial derivatives are collocation derivatives, each multiplied by the
//! border filter `F` (scaled to 1 at the center of the grid). Boundary values
//! are slaved to the interior so that the normal derivative vanishes on every
//! edge, which makes the walls impermeable.

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fields::StationaryDensity;
use crate::grid::{ChebAxis, ChebGrid, ScalarField};
use crate::numerics::pairwise_sum;

pub const DEFAULT_GAMMA: f64 = 1.6;
pub const DEFAULT_PHI: f64 = 0.02;

/// Border filter damping derivative oscillations near the edges.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterParams {
    pub gamma: f64,
    pub phi: f64,
    /// Unscaled filter values.
    pub field: ScalarField,
}

impl FilterParams {
    pub fn new(grid: &Arc<ChebGrid>, gamma: f64, phi: f64) -> Result<Self> {
        if !(phi > 0.0) || !(gamma > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "filter needs gamma, phi > 0, got {gamma}, {phi}"
            )));
        }
        let r = grid.region;
        let profile = |v: f64, lo: f64, hi: f64| {
            let s = std::f64::consts::PI * (v - lo) / (hi - lo) - std::f64::consts::FRAC_PI_2;
            ((s + gamma) / phi).atan() - ((s - gamma) / phi).atan()
        };
        let field = ScalarField::from_fn(grid, |x, y| profile(x, r.x_min, r.x_max) * profile(y, r.y_min, r.y_max));
        Ok(Self { gamma, phi, field })
    }

    /// The filter that leaves derivatives untouched.
    pub fn identity(grid: &Arc<ChebGrid>) -> Self {
        Self {
            gamma: f64::INFINITY,
            phi: 0.0,
            field: ScalarField::from_fn(grid, |_, _| 1.0),
        }
    }

    /// Filter divided by its value at the center of the rectangle.
    pub fn scaled(&self) -> DMatrix<f64> {
        let peak = if self.phi > 0.0 {
            (2.0 * (self.gamma / self.phi).atan()).powi(2)
        } else {
            1.0
        };
        &self.field.values / peak
    }
}

/// Which spatial operator drives the diffusion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OperatorForm {
    /// `(1/p) div(a grad Phi)`.
    #[default]
    Divergence,
    /// `(1/p) (lap Phi + a_x Phi_x + a_y Phi_y)`.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Times at which the filled solution is recorded.
    pub snapshot_times: Vec<f64>,
    /// Keep one `t,step,err_est` line per accepted step.
    pub record_log: bool,
    /// Wall-clock instant after which the integration is abandoned.
    pub deadline: Option<Instant>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-3,
            abs_tol: 1e-6,
            max_steps: 2_000_000,
            snapshot_times: Vec::new(),
            record_log: false,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DiffusionProblem {
    pub a: ScalarField,
    pub p: ScalarField,
    pub filter: FilterParams,
    pub initial: ScalarField,
    pub form: OperatorForm,
}

impl DiffusionProblem {
    pub fn new(a: ScalarField, p: &StationaryDensity, filter: FilterParams, initial: ScalarField) -> Result<Self> {
        if a.values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidArgument(
                "diffusion coefficient must be finite and non-negative".into(),
            ));
        }
        if !initial.is_finite() {
            return Err(Error::InvalidArgument("initial condition is not finite".into()));
        }
        Ok(Self {
            a,
            p: p.field.clone(),
            filter,
            initial,
            form: OperatorForm::Divergence,
        })
    }

    pub fn with_form(mut self, form: OperatorForm) -> Self {
        self.form = form;
        self
    }

    pub fn grid(&self) -> &Arc<ChebGrid> {
        &self.initial.grid
    }
}

/// How a point mass is spread onto grid nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Deposition {
    /// All weight on the nearest node.
    #[default]
    NearestNode,
    /// Tensor four-point Lagrange weights, reproducing moments up to degree three.
    LocalCubic,
}

fn cubic_weights(axis: &ChebAxis, v: f64) -> Vec<(usize, f64)> {
    let n = axis.nodes.len();
    let i = axis.nodes.partition_point(|&x| x <= v).clamp(1, n - 1) - 1;
    let start = i.saturating_sub(1).min(n.saturating_sub(4));
    let idx: Vec<usize> = (start..(start + 4).min(n)).collect();
    idx.iter()
        .map(|&j| {
            let w: f64 = idx
                .iter()
                .filter(|&&m| m != j)
                .map(|&m| (v - axis.nodes[m]) / (axis.nodes[j] - axis.nodes[m]))
                .product();
            (j, w)
        })
        .collect()
}

/// Initial condition `E / p` for the empirical measure putting mass `1/r`
/// on each point.
pub fn deposit_empirical(
    points: &[Complex64],
    r: usize,
    grid: &Arc<ChebGrid>,
    p: &StationaryDensity,
) -> Result<ScalarField> {
    deposit_with(points, r, grid, p, Deposition::NearestNode)
}

pub fn deposit_with(
    points: &[Complex64],
    r: usize,
    grid: &Arc<ChebGrid>,
    p: &StationaryDensity,
    scheme: Deposition,
) -> Result<ScalarField> {
    if r == 0 {
        return Err(Error::InvalidArgument("replicate count must be positive".into()));
    }
    let mut mass = DMatrix::<f64>::zeros(grid.mx(), grid.my());
    let w = 1.0 / r as f64;
    for &z in points {
        let (h, k) = grid.nearest_node(z)?;
        match scheme {
            Deposition::NearestNode => mass[(h, k)] += w,
            Deposition::LocalCubic => {
                for (i, wx) in cubic_weights(&grid.x, z.re) {
                    for (j, wy) in cubic_weights(&grid.y, z.im) {
                        mass[(i, j)] += w * wx * wy;
                    }
                }
            }
        }
    }
    let values = DMatrix::from_fn(grid.mx(), grid.my(), |h, k| {
        mass[(h, k)] / (grid.cell_area(h, k) * p.field.values[(h, k)])
    });
    Ok(ScalarField {
        grid: grid.clone(),
        values,
    })
}

/// Quadrature mass of `h = Phi p`.
pub fn mass(phi: &ScalarField, p: &ScalarField) -> f64 {
    phi.with_values(phi.values.component_mul(&p.values)).integral()
}

/// Discrete Csiszár divergence `sum p Psi(Phi) dx dy` with
/// `Psi(u) = u ln u - u + 1` (negative undershoots count as zero).
pub fn csiszar_divergence(phi: &ScalarField, p: &ScalarField) -> f64 {
    let psi = |u: f64| {
        let u = u.max(0.0);
        if u == 0.0 {
            1.0
        } else {
            u * u.ln() - u + 1.0
        }
    };
    let g = &phi.grid;
    let terms: Vec<f64> = (0..g.mx())
        .flat_map(|h| (0..g.my()).map(move |k| (h, k)))
        .map(|(h, k)| p.values[(h, k)] * psi(phi.values[(h, k)]) * g.cell_area(h, k))
        .collect();
    pairwise_sum(&terms)
}

/// Boundary closure `phi_b = N phi_interior` making the end derivatives vanish.
#[derive(Debug, Clone)]
struct NeumannClosure {
    map: DMatrix<f64>,
}

impl NeumannClosure {
    fn new(diff: &DMatrix<f64>) -> Self {
        let m = diff.nrows();
        let b = Matrix2::new(diff[(0, 0)], diff[(0, m - 1)], diff[(m - 1, 0)], diff[(m - 1, m - 1)]);
        let inv = b.try_inverse().unwrap_or_else(Matrix2::zeros);
        let mut rows = DMatrix::zeros(2, m - 2);
        for j in 1..m - 1 {
            rows[(0, j - 1)] = diff[(0, j)];
            rows[(1, j - 1)] = diff[(m - 1, j)];
        }
        let inv = DMatrix::from_row_slice(2, 2, &[inv[(0, 0)], inv[(0, 1)], inv[(1, 0)], inv[(1, 1)]]);
        Self { map: -(inv * rows) }
    }
}

/// Precomputed operator for one problem.
struct Operator {
    dx: DMatrix<f64>,
    dyt: DMatrix<f64>,
    f: DMatrix<f64>,
    a: DMatrix<f64>,
    ax: DMatrix<f64>,
    ay: DMatrix<f64>,
    p_inv: DMatrix<f64>,
    form: OperatorForm,
    close_x: NeumannClosure,
    close_y: NeumannClosure,
}

struct Scratch {
    gx: DMatrix<f64>,
    gy: DMatrix<f64>,
    tx: DMatrix<f64>,
    ty: DMatrix<f64>,
    filled: DMatrix<f64>,
}

impl Scratch {
    fn new(mx: usize, my: usize) -> Self {
        let z = DMatrix::zeros(mx, my);
        Self {
            gx: z.clone(),
            gy: z.clone(),
            tx: z.clone(),
            ty: z.clone(),
            filled: z,
        }
    }
}

impl Operator {
    fn new(problem: &DiffusionProblem) -> Self {
        let grid = problem.grid();
        let f = problem.filter.scaled();
        let dx = grid.x.diff.clone();
        let dyt = grid.y.diff.transpose();
        let a = problem.a.values.clone();
        let ax = (&dx * &a).component_mul(&f);
        let ay = (&a * &dyt).component_mul(&f);
        Self {
            p_inv: problem.p.values.map(|v| 1.0 / v),
            close_x: NeumannClosure::new(&grid.x.diff),
            close_y: NeumannClosure::new(&grid.y.diff),
            dx,
            dyt,
            f,
            a,
            ax,
            ay,
            form: problem.form,
        }
    }

    /// Filtered operator applied to `v` without any boundary treatment.
    fn apply(&self, v: &DMatrix<f64>, out: &mut DMatrix<f64>, s: &mut Scratch) {
        self.dx.mul_to(v, &mut s.gx);
        v.mul_to(&self.dyt, &mut s.gy);
        s.gx.component_mul_assign(&self.f);
        s.gy.component_mul_assign(&self.f);
        match self.form {
            OperatorForm::Divergence => {
                s.gx.component_mul_assign(&self.a);
                s.gy.component_mul_assign(&self.a);
                self.dx.mul_to(&s.gx, &mut s.tx);
                s.gy.mul_to(&self.dyt, &mut s.ty);
                s.tx += &s.ty;
                s.tx.component_mul_assign(&self.f);
                out.copy_from(&s.tx);
            }
            OperatorForm::Literal => {
                self.dx.mul_to(&s.gx, &mut s.tx);
                s.gy.mul_to(&self.dyt, &mut s.ty);
                s.tx += &s.ty;
                s.tx.component_mul_assign(&self.f);
                out.copy_from(&s.tx);
                s.gx.component_mul_assign(&self.ax);
                s.gy.component_mul_assign(&self.ay);
                *out += &s.gx;
                *out += &s.gy;
            }
        }
        out.component_mul_assign(&self.p_inv);
    }

    /// Overwrites boundary values so the normal derivatives vanish.
    fn fill(&self, v: &mut DMatrix<f64>) {
        let (mx, my) = v.shape();
        let nx = &self.close_x.map;
        for k in 1..my - 1 {
            let (mut lo, mut hi) = (0.0, 0.0);
            for h in 1..mx - 1 {
                lo += nx[(0, h - 1)] * v[(h, k)];
                hi += nx[(1, h - 1)] * v[(h, k)];
            }
            v[(0, k)] = lo;
            v[(mx - 1, k)] = hi;
        }
        let ny = &self.close_y.map;
        for h in 0..mx {
            let (mut lo, mut hi) = (0.0, 0.0);
            for k in 1..my - 1 {
                lo += ny[(0, k - 1)] * v[(h, k)];
                hi += ny[(1, k - 1)] * v[(h, k)];
            }
            v[(h, 0)] = lo;
            v[(h, my - 1)] = hi;
        }
    }

    /// Time derivative of the state: boundary rows stay frozen, since the
    /// boundary values are recomputed from the interior.
    fn rate(&self, state: &DMatrix<f64>, out: &mut DMatrix<f64>, s: &mut Scratch) {
        let mut filled = std::mem::replace(&mut s.filled, DMatrix::zeros(0, 0));
        filled.copy_from(state);
        self.fill(&mut filled);
        self.apply(&filled, out, s);
        s.filled = filled;
        let (mx, my) = out.shape();
        for k in 0..my {
            out[(0, k)] = 0.0;
            out[(mx - 1, k)] = 0.0;
        }
        for h in 0..mx {
            out[(h, 0)] = 0.0;
            out[(h, my - 1)] = 0.0;
        }
    }
}

/// The filtered operator `(1/p) div(a grad Phi)` (or its literal variant)
/// applied to an arbitrary field, with no boundary treatment.
pub fn rhs(phi: &ScalarField, problem: &DiffusionProblem) -> ScalarField {
    let op = Operator::new(problem);
    let (mx, my) = phi.values.shape();
    let mut s = Scratch::new(mx, my);
    let mut out = DMatrix::zeros(mx, my);
    op.apply(&phi.values, &mut out, &mut s);
    phi.with_values(out)
}

/// One accepted integrator step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogLine {
    pub t: f64,
    pub step: f64,
    pub err_est: f64,
}

pub fn write_log<W: Write>(log: &[LogLine], mut w: W) -> Result<()> {
    writeln!(w, "t,step,err_est")?;
    for l in log {
        writeln!(w, "{},{},{}", l.t, l.step, l.err_est)?;
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub t: f64,
    pub phi: ScalarField,
    pub dphi_dt: ScalarField,
    pub snapshots: Vec<(f64, ScalarField)>,
    pub log: Vec<LogLine>,
    pub accepted: usize,
    pub rejected: usize,
}

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

fn combine(out: &mut DMatrix<f64>, y: &DMatrix<f64>, h: f64, terms: &[(f64, &DMatrix<f64>)]) {
    out.copy_from(y);
    for (c, k) in terms {
        if *c != 0.0 {
            out.zip_apply(*k, |o, kv| *o += h * c * kv);
        }
    }
}

/// Integrates the problem from `t = 0` to `t_end`.
pub fn integrate(problem: &DiffusionProblem, t_end: f64, config: &SolverConfig) -> Result<Solution> {
    if !(t_end > 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidArgument(format!("t_end must be positive, got {t_end}")));
    }
    if !(config.rel_tol > 0.0 && config.abs_tol > 0.0) {
        return Err(Error::InvalidArgument("tolerances must be positive".into()));
    }
    let op = Operator::new(problem);
    let grid = problem.grid().clone();
    let (mx, my) = (grid.mx(), grid.my());
    let mut s = Scratch::new(mx, my);

    let mut y = problem.initial.values.clone();
    op.fill(&mut y);
    let mut k1 = DMatrix::zeros(mx, my);
    op.rate(&y, &mut k1, &mut s);
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) =
        (k1.clone(), k1.clone(), k1.clone(), k1.clone(), k1.clone(), k1.clone());
    let mut stage = y.clone();
    let mut y_new = y.clone();

    let scale = |y: &DMatrix<f64>, v: &DMatrix<f64>| {
        let sq: f64 = y
            .iter()
            .zip(v.iter())
            .map(|(y, v)| (v / (config.abs_tol + config.rel_tol * y.abs())).powi(2))
            .sum();
        (sq / (mx * my) as f64).sqrt()
    };
    let d0 = scale(&y, &y);
    let d1 = scale(&y, &k1);
    let mut h = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    h = h.min(t_end);

    let mut snaps: Vec<f64> = config
        .snapshot_times
        .iter()
        .copied()
        .filter(|&t| t > 0.0 && t <= t_end)
        .collect();
    snaps.sort_by(f64::total_cmp);
    let mut snapshots = Vec::new();
    let mut next_snap = 0;

    let mut t = 0.0;
    let mut log = Vec::new();
    let mut accepted = 0;
    let mut rejected = 0;
    while t < t_end {
        if accepted + rejected >= config.max_steps {
            return Err(Error::Integrator {
                t,
                reason: format!("maximum of {} steps exceeded", config.max_steps),
            });
        }
        if (accepted + rejected) % 64 == 0 && config.deadline.is_some_and(|d| Instant::now() >= d) {
            return Err(Error::Integrator {
                t,
                reason: format!("wall-clock deadline reached after {} steps", accepted + rejected),
            });
        }
        let target = snaps.get(next_snap).copied().unwrap_or(t_end);
        let mut last = false;
        if t + h >= target {
            h = target - t;
            last = true;
        }
        if h <= 16.0 * f64::EPSILON * t.max(f64::MIN_POSITIVE) {
            return Err(Error::Integrator {
                t,
                reason: format!("step size underflow (h = {h:e})"),
            });
        }

        combine(&mut stage, &y, h, &[(A21, &k1)]);
        op.rate(&stage, &mut k2, &mut s);
        combine(&mut stage, &y, h, &[(A31, &k1), (A32, &k2)]);
        op.rate(&stage, &mut k3, &mut s);
        combine(&mut stage, &y, h, &[(A41, &k1), (A42, &k2), (A43, &k3)]);
        op.rate(&stage, &mut k4, &mut s);
        combine(&mut stage, &y, h, &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)]);
        op.rate(&stage, &mut k5, &mut s);
        combine(
            &mut stage,
            &y,
            h,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
        );
        op.rate(&stage, &mut k6, &mut s);
        combine(
            &mut y_new,
            &y,
            h,
            &[(B1, &k1), (B3, &k3), (B4, &k4), (B5, &k5), (B6, &k6)],
        );
        op.rate(&y_new, &mut k7, &mut s);

        let mut err: f64 = 0.0;
        for i in 0..mx * my {
            let e = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = config.abs_tol + config.rel_tol * y[i].abs().max(y_new[i].abs());
            err = err.max(e.abs() / sc);
        }
        if !err.is_finite() {
            return Err(Error::Integrator {
                t,
                reason: "non-finite error estimate".into(),
            });
        }
        let factor = if err > 0.0 { 0.9 * err.powf(-0.2) } else { 5.0 };
        if err <= 1.0 {
            t = if last { target } else { t + h };
            std::mem::swap(&mut y, &mut y_new);
            std::mem::swap(&mut k1, &mut k7);
            accepted += 1;
            if config.record_log {
                log.push(LogLine {
                    t,
                    step: h,
                    err_est: err,
                });
            }
            if last && next_snap < snaps.len() {
                let mut v = y.clone();
                op.fill(&mut v);
                snapshots.push((
                    t,
                    ScalarField {
                        grid: grid.clone(),
                        values: v,
                    },
                ));
                next_snap += 1;
            }
            h *= factor.clamp(0.2, 5.0);
        } else {
            rejected += 1;
            h *= factor.clamp(0.2, 1.0);
        }
    }

    op.fill(&mut y);
    let mut rate = DMatrix::zeros(mx, my);
    op.rate(&y, &mut rate, &mut s);
    op.fill(&mut rate);
    Ok(Solution {
        t,
        phi: ScalarField {
            grid: grid.clone(),
            values: y,
        },
        dphi_dt: ScalarField { grid, values: rate },
        snapshots,
        log,
        accepted,
        rejected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{stationary_density, RadialProfile};
    use crate::grid::Region;

    fn flat_problem(grid: &Arc<ChebGrid>, initial: ScalarField) -> DiffusionProblem {
        let p = stationary_density(grid, RadialProfile::Constant(1.0)).unwrap();
        let a = ScalarField::from_fn(grid, |_, _| 1.0);
        DiffusionProblem::new(a, &p, FilterParams::identity(grid), initial).unwrap()
    }

    #[test]
    fn laplacian_of_square() {
        let g = ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 16, 16).unwrap();
        let phi = ScalarField::from_fn(&g, |x, _| x * x);
        let prob = flat_problem(&g, phi.clone());
        let r = rhs(&phi, &prob);
        for h in 1..15 {
            for k in 1..15 {
                assert!((r.values[(h, k)] - 2.0).abs() < 1e-8);
            }
        }
        let c = ScalarField::from_fn(&g, |_, _| 3.0);
        assert!(rhs(&c, &prob).values.amax() < 1e-9);
    }

    #[test]
    fn node_deposit_single_entry() {
        let g = ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 9, 9).unwrap();
        let p = stationary_density(&g, RadialProfile::Cauchy).unwrap();
        let z = g.point(3, 5);
        let f = deposit_empirical(&[z], 1, &g, &p).unwrap();
        let want = 1.0 / (g.cell_area(3, 5) * p.field.values[(3, 5)]);
        assert_eq!(f.values[(3, 5)], want);
        assert_eq!(f.values.iter().filter(|&&v| v != 0.0).count(), 1);
        let twice = deposit_empirical(&[z, z], 1, &g, &p).unwrap();
        assert_eq!(twice.values[(3, 5)], 2.0 * want);
        assert!(deposit_empirical(&[Complex64::new(3.0, 0.0)], 1, &g, &p).is_err());
    }

    #[test]
    fn deposits_have_unit_mass() {
        let g = ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 12, 10).unwrap();
        let p = stationary_density(&g, RadialProfile::Cauchy).unwrap();
        let pts: Vec<Complex64> = (0..7)
            .map(|i| Complex64::new(-0.9 + 0.27 * i as f64, 0.8 - 0.23 * i as f64))
            .collect();
        for scheme in [Deposition::NearestNode, Deposition::LocalCubic] {
            let f = deposit_with(&pts, 7, &g, &p, scheme).unwrap();
            assert!((mass(&f, &p.field) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn tiny_horizon_is_identity() {
        let g = ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 12, 12).unwrap();
        let init = ScalarField::from_fn(&g, |x, y| (-(x * x + y * y) * 4.0).exp());
        let prob = flat_problem(&g, init);
        let sol = integrate(&prob, 1e-12, &SolverConfig::default()).unwrap();
        let mut filled = prob.initial.values.clone();
        Operator::new(&prob).fill(&mut filled);
        assert!((sol.phi.values - filled).amax() < 1e-8);
    }

    #[test]
    fn filter_is_bounded_by_center_value() {
        let g = ChebGrid::new(Region::new(-1.0, 2.0, 0.0, 1.0).unwrap(), 17, 17).unwrap();
        let f = FilterParams::new(&g, DEFAULT_GAMMA, DEFAULT_PHI).unwrap();
        let s = f.scaled();
        assert!(s.iter().all(|&v| v > 0.0 && v <= 1.0 + 1e-15));
        assert!((s[(8, 8)] - 1.0).abs() < 1e-12);
    }
}
