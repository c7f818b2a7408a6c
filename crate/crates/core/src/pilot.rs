//! Closed-form pilot estimate of the condensed density from the triangular
//! factors of shifted pencils, and relative-maximum detection.

use std::io::Write;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{ChebGrid, ScalarField};
use crate::pencil::{build_pencil, HankelPencil};
use crate::signal::ReplicateSet;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotConfig {
    pub beta: f64,
    pub clamp_negatives: bool,
    /// Fraction of the global maximum a relative maximum must reach.
    pub maxima_threshold: f64,
}

impl PilotConfig {
    /// `beta = 5 n sigma^2`, negatives clamped, threshold 0.1.
    pub fn for_model(n: usize, sigma: f64) -> Self {
        Self {
            beta: 5.0 * n as f64 * sigma * sigma,
            clamp_negatives: true,
            maxima_threshold: 0.1,
        }
    }
}

/// Moduli of the diagonal of the triangular factor of `U1 - z U0`.
pub fn r_diagonal(pencil: &HankelPencil, z: Complex64) -> Vec<f64> {
    let m: DMatrix<Complex64> = &pencil.u1 - &pencil.u0 * z;
    let r = m.qr().r();
    (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].norm()).collect()
}

/// `S(z) = sum_r sum_k ln(|R_kk(z)|^2 / (sigma^2 beta) + 1)` on every node.
pub fn pilot_potential(replicates: &ReplicateSet, grid: &Arc<ChebGrid>, config: &PilotConfig) -> Result<ScalarField> {
    let scale = replicates.sigma * replicates.sigma * config.beta;
    if !(scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "pilot needs sigma > 0 and beta > 0, got sigma = {}, beta = {}",
            replicates.sigma, config.beta
        )));
    }
    let pencils: Vec<HankelPencil> = replicates.data.iter().map(|d| build_pencil(d)).collect::<Result<_>>()?;
    let (mx, my) = (grid.mx(), grid.my());
    let flat: Vec<f64> = (0..mx * my)
        .into_par_iter()
        .map(|i| {
            let z = grid.point(i / my, i % my);
            pencils
                .iter()
                .map(|p| r_diagonal(p, z).iter().map(|d| (d * d / scale).ln_1p()).sum::<f64>())
                .sum::<f64>()
        })
        .collect();
    if let Some(i) = flat.iter().position(|v| !v.is_finite()) {
        return Err(Error::Factorization {
            replicate: 0,
            h: i / my,
            k: i % my,
        });
    }
    Ok(ScalarField {
        grid: grid.clone(),
        values: DMatrix::from_row_slice(mx, my, &flat),
    })
}

/// Five-point Laplacian with nonuniform spacing; zero on boundary nodes.
pub fn discrete_laplacian(field: &ScalarField) -> ScalarField {
    let g = &field.grid;
    let (x, y, v) = (&g.x.nodes, &g.y.nodes, &field.values);
    let second = |fm: f64, f0: f64, fp: f64, am: f64, a0: f64, ap: f64| {
        2.0 * ((fp - f0) / (ap - a0) - (f0 - fm) / (a0 - am)) / (ap - am)
    };
    let values = DMatrix::from_fn(g.mx(), g.my(), |h, k| {
        if h == 0 || k == 0 || h + 1 == g.mx() || k + 1 == g.my() {
            return 0.0;
        }
        second(v[(h - 1, k)], v[(h, k)], v[(h + 1, k)], x[h - 1], x[h], x[h + 1])
            + second(v[(h, k - 1)], v[(h, k)], v[(h, k + 1)], y[k - 1], y[k], y[k + 1])
    });
    field.with_values(values)
}

/// Laplacian of a potential, optionally clamped at zero and scaled to unit mass.
pub fn density_from_potential(potential: &ScalarField, clamp_negatives: bool) -> ScalarField {
    let mut lap = discrete_laplacian(potential);
    if clamp_negatives {
        lap = lap.map(|v| v.max(0.0));
    }
    let mass = lap.integral();
    if mass > 0.0 {
        lap.map(|v| v / mass)
    } else {
        lap
    }
}

pub fn pilot_density(replicates: &ReplicateSet, grid: &Arc<ChebGrid>, config: &PilotConfig) -> Result<ScalarField> {
    let s = pilot_potential(replicates, grid, config)?;
    Ok(density_from_potential(&s, config.clamp_negatives))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Maximum {
    pub h: usize,
    pub k: usize,
    pub x: f64,
    pub y: f64,
    pub value: f64,
}

/// Interior nodes strictly above their eight neighbours and at least
/// `threshold` times the global maximum, in decreasing order of value.
pub fn relative_maxima(field: &ScalarField, threshold: f64) -> Vec<Maximum> {
    let g = &field.grid;
    let v = &field.values;
    let top = v.max();
    if !(top > 0.0) || !top.is_finite() {
        return Vec::new();
    }
    let mut out = Vec::new();
    for h in 1..g.mx().saturating_sub(1) {
        for k in 1..g.my().saturating_sub(1) {
            let c = v[(h, k)];
            if c < threshold * top {
                continue;
            }
            let strict = (h - 1..=h + 1)
                .flat_map(|i| (k - 1..=k + 1).map(move |j| (i, j)))
                .filter(|&(i, j)| (i, j) != (h, k))
                .all(|(i, j)| c > v[(i, j)]);
            if strict {
                out.push(Maximum {
                    h,
                    k,
                    x: g.x.nodes[h],
                    y: g.y.nodes[k],
                    value: c,
                });
            }
        }
    }
    out.sort_by(|a, b| b.value.total_cmp(&a.value));
    out
}

pub fn count_relative_maxima(field: &ScalarField, threshold: f64) -> usize {
    relative_maxima(field, threshold).len()
}

/// Writes `idx,x,y,value` rows.
pub fn write_maxima<W: Write>(maxima: &[Maximum], mut w: W) -> Result<()> {
    writeln!(w, "idx,x,y,value")?;
    for (i, m) in maxima.iter().enumerate() {
        writeln!(w, "{},{},{},{}", i, m.x, m.y, m.value)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Region;

    fn grid(m: usize) -> Arc<ChebGrid> {
        ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), m, m).unwrap()
    }

    #[test]
    fn laplacian_of_constant_and_quadratic() {
        let g = grid(12);
        let c = ScalarField::from_fn(&g, |_, _| 4.0);
        assert!(discrete_laplacian(&c).values.amax() < 1e-12);
        let q = ScalarField::from_fn(&g, |x, y| x * x + 2.0 * y * y);
        let l = discrete_laplacian(&q);
        assert!((l.values[(5, 6)] - 6.0).abs() < 1e-10);
        let d = density_from_potential(&c, true);
        assert!(d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn maxima_of_bumps() {
        let g = grid(33);
        let one = ScalarField::from_fn(&g, |x, y| (-10.0 * ((x - 0.1).powi(2) + (y + 0.2).powi(2))).exp());
        let m = relative_maxima(&one, 0.1);
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].h, m[0].k), (g.x.nearest(0.1), g.y.nearest(-0.2)));
        let two = ScalarField::from_fn(&g, |x, y| {
            (-40.0 * ((x - 0.5).powi(2) + y * y)).exp() + (-40.0 * ((x + 0.5).powi(2) + y * y)).exp()
        });
        assert_eq!(count_relative_maxima(&two, 0.1), 2);
        assert!(count_relative_maxima(&two, 1.0) <= 1);
    }

    #[test]
    fn maxima_file() {
        let m = Maximum {
            h: 1,
            k: 2,
            x: 0.5,
            y: -0.25,
            value: 3.0,
        };
        let mut buf = Vec::new();
        write_maxima(&[m], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "idx,x,y,value\n0,0.5,-0.25,3\n");
    }
}
