//! Residual, diffusion-coefficient and stationary-density fields on a grid.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ChebGrid, ScalarField};
use crate::numerics::percentile;

/// Relative pivot size below which a column of the power matrix is treated as
/// linearly dependent.
pub const RANK_TOLERANCE: f64 = 1e-12;

/// Percentile at which the diffusion coefficient is clipped.
pub const COEFF_CLIP_PERCENTILE: f64 = 99.0;

/// `[1, z, z^2, ..., z^{n-1}]`.
pub fn powers(z: Complex64, n: usize) -> DVector<Complex64> {
    let mut v = DVector::from_element(n, Complex64::new(1.0, 0.0));
    for k in 1..n {
        v[k] = v[k - 1] * z;
    }
    v
}

/// Orthonormal basis of the span of the power vectors of `nodes`, found by a
/// column-pivoted QR of the column-normalized power matrix.
fn orthonormal_basis(nodes: &[Complex64], n: usize) -> DMatrix<Complex64> {
    if nodes.is_empty() {
        return DMatrix::zeros(n, 0);
    }
    let mut m = DMatrix::zeros(n, nodes.len());
    for (j, &z) in nodes.iter().enumerate() {
        let v = powers(z, n);
        let norm = v.norm();
        m.set_column(j, &(v / Complex64::new(norm, 0.0)));
    }
    let qr = m.col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].norm();
    let rank = (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].norm() > RANK_TOLERANCE * lead)
        .count();
    qr.q().columns(0, rank).into_owned()
}

fn project_out(q: &DMatrix<Complex64>, v: &DVector<Complex64>) -> DVector<Complex64> {
    let mut w = v - q * (q.adjoint() * v);
    // second pass restores orthogonality lost to cancellation
    w -= q * (q.adjoint() * &w);
    w
}

/// Cached factorization of the fixed part of the power matrix for one
/// (cluster, replicate) pair.
///
/// The residual at `z` is that of projecting `s_hat` onto the span of the
/// power vectors of `fixed` together with that of `z`.
#[derive(Debug, Clone)]
pub struct ProjectionWorkspace {
    pub fixed: Vec<Complex64>,
    pub s_hat: DVector<Complex64>,
    basis: DMatrix<Complex64>,
    residual: DVector<Complex64>,
    residual_sq: f64,
}

impl ProjectionWorkspace {
    pub fn new(s_hat: &[Complex64], fixed: &[Complex64]) -> Self {
        let n = s_hat.len();
        let s = DVector::from_column_slice(s_hat);
        let basis = orthonormal_basis(fixed, n);
        let residual = project_out(&basis, &s);
        let residual_sq = residual.norm_squared();
        Self {
            fixed: fixed.to_vec(),
            s_hat: s,
            basis,
            residual,
            residual_sq,
        }
    }

    /// Rank of the fixed part after truncation.
    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// Residual `nu(z)` using the cached fixed-part factorization.
    pub fn nu(&self, z: Complex64) -> f64 {
        let v = powers(z, self.s_hat.len());
        let vnorm = v.norm();
        let w = project_out(&self.basis, &(v / Complex64::new(vnorm, 0.0)));
        let wn2 = w.norm_squared();
        if wn2.sqrt() <= RANK_TOLERANCE {
            return self.residual_sq.max(0.0);
        }
        let c = w.dotc(&self.residual);
        (self.residual_sq - c.norm_sqr() / wn2).max(0.0)
    }

    /// Residual from a fresh factorization including `z`.
    pub fn nu_direct(&self, z: Complex64) -> f64 {
        let mut nodes = self.fixed.clone();
        nodes.push(z);
        let q = orthonormal_basis(&nodes, self.s_hat.len());
        project_out(&q, &self.s_hat).norm_squared().max(0.0)
    }
}

/// Samples `nu` on every grid node in parallel.
pub fn nu_field(ws: &ProjectionWorkspace, grid: &Arc<ChebGrid>) -> ScalarField {
    let (mx, my) = (grid.mx(), grid.my());
    let flat: Vec<f64> = (0..mx * my)
        .into_par_iter()
        .map(|i| ws.nu(grid.point(i / my, i % my)))
        .collect();
    ScalarField {
        grid: grid.clone(),
        values: DMatrix::from_row_slice(mx, my, &flat),
    }
}

/// Circularly symmetric profile of the stationary density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RadialProfile {
    /// `1 / (pi (1 + r^2)^2)`.
    Cauchy,
    /// The same value everywhere.
    Constant(f64),
}

impl RadialProfile {
    pub fn value(&self, r2: f64) -> f64 {
        match *self {
            RadialProfile::Cauchy => 1.0 / (PI * (1.0 + r2).powi(2)),
            RadialProfile::Constant(c) => c,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDensity {
    pub field: ScalarField,
    pub profile: RadialProfile,
}

pub fn stationary_density(grid: &Arc<ChebGrid>, profile: RadialProfile) -> Result<StationaryDensity> {
    let field = ScalarField::from_fn(grid, |x, y| profile.value(x * x + y * y));
    if let Some((h, k)) = (0..grid.mx())
        .flat_map(|h| (0..grid.my()).map(move |k| (h, k)))
        .find(|&(h, k)| !(field.values[(h, k)] > 0.0) || !field.values[(h, k)].is_finite())
    {
        return Err(Error::NonPositiveProfile {
            radius: grid.point(h, k).norm(),
        });
    }
    Ok(StationaryDensity { field, profile })
}

/// `a = p nu / (|grad nu|^2 + eps)`, clipped above at its 99th grid percentile.
pub fn diffusion_coeff(p: &StationaryDensity, nu: &ScalarField, grad: &(ScalarField, ScalarField)) -> ScalarField {
    diffusion_coeff_clipped(p, nu, grad, COEFF_CLIP_PERCENTILE)
}

/// As [`diffusion_coeff`] with the clipping percentile given explicitly
/// (`100` disables clipping).
pub fn diffusion_coeff_clipped(
    p: &StationaryDensity,
    nu: &ScalarField,
    grad: &(ScalarField, ScalarField),
    clip_percentile: f64,
) -> ScalarField {
    let g2 = grad.0.values.component_mul(&grad.0.values) + grad.1.values.component_mul(&grad.1.values);
    let eps = (1e-12 * g2.max()).max(f64::MIN_POSITIVE);
    let raw = DMatrix::from_fn(nu.values.nrows(), nu.values.ncols(), |h, k| {
        p.field.values[(h, k)] * nu.values[(h, k)] / (g2[(h, k)] + eps)
    });
    let cap = percentile(raw.as_slice(), clip_percentile);
    nu.with_values(raw.map(|v| v.min(cap)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Region;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn two_sample_residual_closed_form() {
        let s = [c(1.5, -0.5), c(0.3, 0.9)];
        let xi = s[1] / s[0];
        let ws = ProjectionWorkspace::new(&s, &[]);
        for z in [c(0.0, 0.0), c(1.0, -2.0), c(-0.4, 0.7)] {
            let want = s[0].norm_sqr() * (z - xi).norm_sqr() / (1.0 + z.norm_sqr());
            assert!((ws.nu(z) - want).abs() < 1e-12, "{} vs {want}", ws.nu(z));
        }
    }

    #[test]
    fn fast_path_matches_direct() {
        let s: Vec<Complex64> = (0..12)
            .map(|k| c((k as f64 * 0.7).sin(), (k as f64 * 1.3).cos()))
            .collect();
        let fixed = [c(0.9, 0.1), c(-0.3, 0.8), c(0.2, -0.95)];
        let ws = ProjectionWorkspace::new(&s, &fixed);
        let scale: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        for z in [c(0.5, 0.5), c(-1.1, 0.2), c(0.0, 0.0), fixed[1]] {
            assert!((ws.nu(z) - ws.nu_direct(z)).abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn default_profile_values() {
        let g = ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 9, 9).unwrap();
        let p = stationary_density(&g, RadialProfile::Cauchy).unwrap();
        assert!((p.field.values[(4, 4)] - 1.0 / PI).abs() < 1e-15);
        assert_eq!(p.field.values[(1, 3)], p.field.values[(3, 1)]);
        assert!(stationary_density(&g, RadialProfile::Constant(0.0)).is_err());
    }

    #[test]
    fn zero_residual_gives_zero_coefficient() {
        let g = ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 9, 9).unwrap();
        let p = stationary_density(&g, RadialProfile::Cauchy).unwrap();
        let nu = ScalarField::zeros(&g);
        let a = diffusion_coeff(&p, &nu, &nu.gradient());
        assert!(a.values.iter().all(|&v| v == 0.0));
    }
}
