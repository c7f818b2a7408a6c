//! Closed-form two-sample condensed density and a Monte Carlo estimate of the
//! condensed density for any model.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ChebAxis, ChebGrid, ScalarField};
use crate::numerics::gauss_legendre;
use crate::pencil::{build_pencil, generalized_eigenvalues};
use crate::rng::RngConfig;
use crate::signal::{ExponentialModel, NoiseConvention};

/// Single-component model seen through its signal-to-noise ratio.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SnrPoint {
    pub c1: Complex64,
    pub xi1: Complex64,
    pub sigma: f64,
}

impl SnrPoint {
    pub fn new(c1: Complex64, xi1: Complex64, sigma: f64) -> Result<Self> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {sigma}")));
        }
        Ok(Self { c1, xi1, sigma })
    }

    pub fn rho(&self) -> f64 {
        self.c1.norm_sqr() / (self.sigma * self.sigma)
    }
}

/// Density of the eigenvalue `d_1 / d_0` of a noisy two-sample signal.
pub fn h2_closed_form(point: &SnrPoint, z: Complex64) -> f64 {
    h2_with_rho(point.rho(), point.xi1, z)
}

pub fn h2_with_rho(rho: f64, xi: Complex64, z: Complex64) -> f64 {
    let q = 1.0 + z.norm_sqr();
    let decay = (-rho * (z - xi).norm_sqr() / q).exp();
    let cross = (1.0 + z.conj() * xi).norm_sqr();
    decay * (rho * cross / (PI * q.powi(3)) + 1.0 / (PI * q * q))
}

/// Edges of the nearest-node cells along an axis: midpoints between nodes,
/// closed by the axis ends.
pub fn voronoi_edges(axis: &ChebAxis) -> Vec<f64> {
    let n = axis.nodes.len();
    let mut e = Vec::with_capacity(n + 1);
    e.push(axis.nodes[0]);
    e.extend(axis.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    e.push(axis.nodes[n - 1]);
    e
}

/// Integral of `f` over the nearest-node cell of `(h, k)` by tensor
/// Gauss–Legendre quadrature of the given order.
pub fn cell_integral(grid: &ChebGrid, h: usize, k: usize, order: usize, f: impl Fn(Complex64) -> f64) -> f64 {
    let ex = voronoi_edges(&grid.x);
    let ey = voronoi_edges(&grid.y);
    let (t, w) = gauss_legendre(order);
    let (x0, x1, y0, y1) = (ex[h], ex[h + 1], ey[k], ey[k + 1]);
    let (hx, hy) = (0.5 * (x1 - x0), 0.5 * (y1 - y0));
    let mut s = 0.0;
    for (ti, wi) in t.iter().zip(&w) {
        for (tj, wj) in t.iter().zip(&w) {
            let z = Complex64::new(x0 + hx * (ti + 1.0), y0 + hy * (tj + 1.0));
            s += wi * wj * f(z);
        }
    }
    s * hx * hy
}

/// Monte Carlo histogram of the eigenvalues of `trials` noisy pencils, as
/// counts per nearest-node cell.
pub fn mc_eigenvalue_counts(
    model: &ExponentialModel,
    trials: usize,
    grid: &Arc<ChebGrid>,
    rng: &RngConfig,
    convention: NoiseConvention,
) -> Result<DMatrix<f64>> {
    if trials == 0 {
        return Err(Error::InvalidArgument("need at least one trial".into()));
    }
    let s = model.synthesize();
    let std = match convention {
        NoiseConvention::Circular => model.sigma * std::f64::consts::FRAC_1_SQRT_2,
        NoiseConvention::PerComponent => model.sigma,
    };
    let (mx, my) = (grid.mx(), grid.my());
    let chunk = 1000;
    let partials: Vec<Result<Vec<f64>>> = (0..trials.div_ceil(chunk))
        .into_par_iter()
        .map(|c| {
            let mut counts = vec![0.0; mx * my];
            for t in c * chunk..((c + 1) * chunk).min(trials) {
                let mut g = rng.substream(&[t as u64]);
                let d: Vec<Complex64> = s
                    .iter()
                    .map(|&sk| {
                        let re: f64 = StandardNormal.sample(&mut g);
                        let im: f64 = StandardNormal.sample(&mut g);
                        sk + Complex64::new(std * re, std * im)
                    })
                    .collect();
                let eig: Vec<Complex64> = if d.len() == 2 {
                    vec![d[1] / d[0]]
                } else {
                    generalized_eigenvalues(&build_pencil(&d)?, t)?.finite().collect()
                };
                for z in eig {
                    if z.is_finite() && grid.region.contains(z) {
                        let (h, k) = grid.nearest_node(z)?;
                        counts[h * my + k] += 1.0;
                    }
                }
            }
            Ok(counts)
        })
        .collect();
    let mut total = vec![0.0; mx * my];
    for part in partials {
        for (a, b) in total.iter_mut().zip(part?) {
            *a += b;
        }
    }
    Ok(DMatrix::from_row_slice(mx, my, &total))
}

/// Monte Carlo condensed density: cell counts divided by `trials * p * dx dy`.
pub fn mc_condensed_density(
    model: &ExponentialModel,
    trials: usize,
    grid: &Arc<ChebGrid>,
    rng: &RngConfig,
) -> Result<ScalarField> {
    let counts = mc_eigenvalue_counts(model, trials, grid, rng, NoiseConvention::Circular)?;
    let p = (model.n / 2) as f64;
    let scale = trials as f64 * p;
    Ok(ScalarField {
        grid: grid.clone(),
        values: DMatrix::from_fn(grid.mx(), grid.my(), |h, k| {
            counts[(h, k)] / (scale * grid.cell_area(h, k))
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Region;

    #[test]
    fn value_at_origin() {
        let pt = SnrPoint::new(Complex64::new(2.0, 0.0), Complex64::new(0.0, 0.0), 1.0).unwrap();
        assert!((h2_closed_form(&pt, Complex64::new(0.0, 0.0)) - 5.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn zero_snr_is_stationary_density() {
        for z in [Complex64::new(0.3, -1.2), Complex64::new(2.0, 2.0)] {
            let q = 1.0 + z.norm_sqr();
            let want = 1.0 / (PI * q * q);
            assert!((h2_with_rho(0.0, Complex64::new(0.5, 0.5), z) - want).abs() < 1e-16);
        }
    }

    #[test]
    fn rotation_invariance() {
        let xi = Complex64::new(0.6, -0.4);
        let z = Complex64::new(-0.2, 0.9);
        let rot = Complex64::from_polar(1.0, 0.77);
        let a = h2_with_rho(7.0, xi, z);
        let b = h2_with_rho(7.0, xi * rot, z * rot);
        assert!((a - b).abs() < 1e-14);
    }

    #[test]
    fn voronoi_cells_tile_the_region() {
        let g = ChebGrid::new(Region::new(-2.0, 2.0, -1.0, 1.0).unwrap(), 9, 8).unwrap();
        let mut area = 0.0;
        for h in 0..9 {
            for k in 0..8 {
                area += cell_integral(&g, h, k, 2, |_| 1.0);
            }
        }
        assert!((area - 8.0).abs() < 1e-12);
    }

    #[test]
    fn tiny_noise_concentrates_on_nodes() {
        let model =
            ExponentialModel::new(vec![Complex64::new(1.0, 0.0)], vec![Complex64::new(0.3, 0.2)], 2, 1e-6).unwrap();
        let g = ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 16, 16).unwrap();
        let f = mc_condensed_density(&model, 200, &g, &RngConfig::new(4, "mc")).unwrap();
        let (h, k) = g.nearest_node(Complex64::new(0.3, 0.2)).unwrap();
        assert!((f.values[(h, k)] * g.cell_area(h, k) - 1.0).abs() < 1e-12);
        assert!((f.integral() - 1.0).abs() < 1e-12);
    }
}
