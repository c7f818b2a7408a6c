//! Chebyshev–Gauss–Lobatto tensor grids and scalar fields living on them.

use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::numerics::pairwise_sum;
use crate::signal::parse_field;

/// Axis-aligned rectangle `[x_min, x_max] x [y_min, y_max]` in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Region {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Region {
    pub fn new(x_min: f64, x_max: f64, y_min: f64, y_max: f64) -> Result<Self> {
        let ok = [x_min, x_max, y_min, y_max].iter().all(|v| v.is_finite()) && x_min < x_max && y_min < y_max;
        if !ok {
            return Err(Error::DegenerateRegion {
                x_min,
                x_max,
                y_min,
                y_max,
            });
        }
        Ok(Self {
            x_min,
            x_max,
            y_min,
            y_max,
        })
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.x_min && z.re <= self.x_max && z.im >= self.y_min && z.im <= self.y_max
    }

    pub fn diagonal_sq(&self) -> f64 {
        (self.x_max - self.x_min).powi(2) + (self.y_max - self.y_min).powi(2)
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }
}

/// Nodes, cell widths and differentiation matrix along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebAxis {
    pub nodes: Vec<f64>,
    /// `widths[h] = nodes[h] - nodes[h-1]`, with `widths[0] = widths[1]`.
    pub widths: Vec<f64>,
    /// Collocation derivative: `(D f)(x_i) = sum_j D[i, j] f(x_j)`.
    pub diff: DMatrix<f64>,
}

impl ChebAxis {
    pub fn new(lo: f64, hi: f64, m: usize) -> Self {
        let n = m - 1;
        let half = 0.5 * (hi - lo);
        let t: Vec<f64> = (0..m).map(|h| -(PI * h as f64 / n as f64).cos()).collect();
        let mut nodes: Vec<f64> = t.iter().map(|&s| lo + half * (s + 1.0)).collect();
        nodes[0] = lo;
        nodes[n] = hi;
        let mut widths: Vec<f64> = (0..m)
            .map(|h| if h == 0 { 0.0 } else { nodes[h] - nodes[h - 1] })
            .collect();
        widths[0] = widths[1];

        let weight = |i: usize| {
            let edge = if i == 0 || i == n { 2.0 } else { 1.0 };
            if i.is_multiple_of(2) {
                edge
            } else {
                -edge
            }
        };
        let mut diff = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    diff[(i, j)] = weight(i) / weight(j) / (t[i] - t[j]);
                }
            }
        }
        for i in 0..m {
            let off: f64 = (0..m).filter(|&j| j != i).map(|j| diff[(i, j)]).sum();
            diff[(i, i)] = -off;
        }
        diff /= half;
        Self { nodes, widths, diff }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the node closest to `v`.
    pub fn nearest(&self, v: f64) -> usize {
        let i = self.nodes.partition_point(|&x| x < v);
        if i == 0 {
            0
        } else if i == self.nodes.len() || v - self.nodes[i - 1] <= self.nodes[i] - v {
            i - 1
        } else {
            i
        }
    }
}

/// Tensor product Chebyshev grid over a rectangle.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebGrid {
    pub region: Region,
    pub x: ChebAxis,
    pub y: ChebAxis,
}

pub const MIN_NODES: usize = 8;

impl ChebGrid {
    pub fn new(region: Region, mx: usize, my: usize) -> Result<Arc<Self>> {
        Self::with_min_nodes(region, mx, my, MIN_NODES)
    }

    /// Like [`ChebGrid::new`] with a custom lower bound on the node counts.
    pub fn with_min_nodes(region: Region, mx: usize, my: usize, min_nodes: usize) -> Result<Arc<Self>> {
        let min_nodes = min_nodes.max(2);
        if mx < min_nodes || my < min_nodes {
            return Err(Error::InvalidArgument(format!(
                "grid needs at least {min_nodes} nodes per axis, got {mx} x {my}"
            )));
        }
        let region = Region::new(region.x_min, region.x_max, region.y_min, region.y_max)?;
        Ok(Arc::new(Self {
            region,
            x: ChebAxis::new(region.x_min, region.x_max, mx),
            y: ChebAxis::new(region.y_min, region.y_max, my),
        }))
    }

    pub fn mx(&self) -> usize {
        self.x.len()
    }

    pub fn my(&self) -> usize {
        self.y.len()
    }

    pub fn point(&self, h: usize, k: usize) -> Complex64 {
        Complex64::new(self.x.nodes[h], self.y.nodes[k])
    }

    pub fn cell_area(&self, h: usize, k: usize) -> f64 {
        self.x.widths[h] * self.y.widths[k]
    }

    /// Nearest node of a point inside the bounds.
    pub fn nearest_node(&self, z: Complex64) -> Result<(usize, usize)> {
        if !self.region.contains(z) {
            return Err(Error::PointOutsideGrid { re: z.re, im: z.im });
        }
        Ok((self.x.nearest(z.re), self.y.nearest(z.im)))
    }
}

/// Real values on a [`ChebGrid`]; row `h` follows the x axis, column `k` the y axis.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub grid: Arc<ChebGrid>,
    pub values: DMatrix<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<ChebGrid>) -> Self {
        Self {
            grid: grid.clone(),
            values: DMatrix::zeros(grid.mx(), grid.my()),
        }
    }

    pub fn from_fn(grid: &Arc<ChebGrid>, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let values = DMatrix::from_fn(grid.mx(), grid.my(), |h, k| f(grid.x.nodes[h], grid.y.nodes[k]));
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn with_values(&self, values: DMatrix<f64>) -> Self {
        Self {
            grid: self.grid.clone(),
            values,
        }
    }

    pub fn map(&self, f: impl FnMut(f64) -> f64) -> Self {
        self.with_values(self.values.map(f))
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Cell-width quadrature `sum v(h,k) dx(h) dy(k)`.
    pub fn integral(&self) -> f64 {
        let g = &self.grid;
        let terms: Vec<f64> = (0..g.mx())
            .flat_map(|h| (0..g.my()).map(move |k| (h, k)))
            .map(|(h, k)| self.values[(h, k)] * g.cell_area(h, k))
            .collect();
        pairwise_sum(&terms)
    }

    /// `(d/dx, d/dy)` by Chebyshev collocation along each axis.
    pub fn gradient(&self) -> (ScalarField, ScalarField) {
        let (dx, dy) = spectral_gradient(&self.grid, &self.values);
        (self.with_values(dx), self.with_values(dy))
    }

    pub fn max(&self) -> f64 {
        self.values.max()
    }

    pub fn min(&self) -> f64 {
        self.values.min()
    }

    /// Writes the grid text format: a `mx,my,xmin,xmax,ymin,ymax` record, then
    /// `h,k,x,y,value` rows with `k` varying fastest.
    pub fn write_text<W: Write>(&self, mut w: W) -> Result<()> {
        let g = &self.grid;
        let r = &g.region;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            g.mx(),
            g.my(),
            r.x_min,
            r.x_max,
            r.y_min,
            r.y_max
        )?;
        for h in 0..g.mx() {
            for k in 0..g.my() {
                writeln!(
                    w,
                    "{},{},{},{},{}",
                    h,
                    k,
                    g.x.nodes[h],
                    g.y.nodes[k],
                    self.values[(h, k)]
                )?;
            }
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let header = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty grid file".into(),
        })??;
        let f: Vec<&str> = header.trim().split(',').collect();
        if f.len() != 6 {
            return Err(Error::Parse {
                line: 1,
                msg: "expected `mx,my,xmin,xmax,ymin,ymax`".into(),
            });
        }
        let mx: usize = parse_field(f[0], 1)?;
        let my: usize = parse_field(f[1], 1)?;
        let region = Region::new(
            parse_field(f[2], 1)?,
            parse_field(f[3], 1)?,
            parse_field(f[4], 1)?,
            parse_field(f[5], 1)?,
        )?;
        let grid = ChebGrid::with_min_nodes(region, mx, my, 2)?;
        let mut field = ScalarField::zeros(&grid);
        let mut seen = 0;
        for (i, line) in lines.enumerate() {
            let line = line?;
            let line_no = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let f: Vec<&str> = line.trim().split(',').collect();
            if f.len() != 5 {
                return Err(Error::Parse {
                    line: line_no,
                    msg: "expected `h,k,x,y,value`".into(),
                });
            }
            let h: usize = parse_field(f[0], line_no)?;
            let k: usize = parse_field(f[1], line_no)?;
            if h >= mx || k >= my {
                return Err(Error::Parse {
                    line: line_no,
                    msg: format!("node ({h}, {k}) out of range"),
                });
            }
            field.values[(h, k)] = parse_field(f[4], line_no)?;
            seen += 1;
        }
        if seen != mx * my {
            return Err(Error::Parse {
                line: 0,
                msg: format!("expected {} nodes, found {seen}", mx * my),
            });
        }
        Ok(field)
    }
}

/// Collocation derivatives of a value matrix laid out as in [`ScalarField`].
pub fn spectral_gradient(grid: &ChebGrid, v: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    (&grid.x.diff * v, v * grid.y.diff.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit() -> Region {
        Region::new(-1.0, 1.0, -1.0, 1.0).unwrap()
    }

    #[test]
    fn five_node_axis() {
        let a = ChebAxis::new(-1.0, 1.0, 5);
        let s = 0.5f64.sqrt();
        for (x, want) in a.nodes.iter().zip([-1.0, -s, 0.0, s, 1.0]) {
            assert_abs_diff_eq!(*x, want, epsilon = 1e-15);
        }
        assert_eq!(a.widths[0], a.widths[1]);
        assert_abs_diff_eq!(a.widths[2], s, epsilon = 1e-15);
    }

    #[test]
    fn affine_map() {
        let a = ChebAxis::new(0.0, 2.0, 9);
        let b = ChebAxis::new(-1.0, 1.0, 9);
        for (x, y) in a.nodes.iter().zip(&b.nodes) {
            assert_abs_diff_eq!(*x, y + 1.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn degenerate_inputs() {
        assert!(Region::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(ChebGrid::new(unit(), 7, 8).is_err());
    }

    #[test]
    fn derivative_of_square() {
        let g = ChebGrid::new(unit(), 12, 10).unwrap();
        let f = ScalarField::from_fn(&g, |x, _| x * x);
        let (fx, fy) = f.gradient();
        for h in 0..12 {
            for k in 0..10 {
                assert_abs_diff_eq!(fx.values[(h, k)], 2.0 * g.x.nodes[h], epsilon = 1e-10);
                assert_abs_diff_eq!(fy.values[(h, k)], 0.0, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn trigonometric_derivative_m64() {
        let g = ChebGrid::new(unit(), 64, 64).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| (3.0 * x).sin() * (2.0 * y).cos());
        let (fx, fy) = f.gradient();
        let ex = ScalarField::from_fn(&g, |x, y| 3.0 * (3.0 * x).cos() * (2.0 * y).cos());
        let ey = ScalarField::from_fn(&g, |x, y| -2.0 * (3.0 * x).sin() * (2.0 * y).sin());
        assert!((fx.values - ex.values).amax() < 1e-8);
        assert!((fy.values - ey.values).amax() < 1e-8);
    }

    #[test]
    fn nearest_node_lookup() {
        let g = ChebGrid::new(unit(), 9, 9).unwrap();
        assert_eq!(g.nearest_node(Complex64::new(-1.0, 1.0)).unwrap(), (0, 8));
        assert_eq!(g.nearest_node(Complex64::new(0.01, -0.02)).unwrap(), (4, 4));
        assert!(g.nearest_node(Complex64::new(1.5, 0.0)).is_err());
    }

    #[test]
    fn text_round_trip() {
        let g = ChebGrid::new(Region::new(0.0, 2.0, -1.0, 3.0).unwrap(), 8, 9).unwrap();
        let f = ScalarField::from_fn(&g, |x, y| x * y + 0.1);
        let mut buf = Vec::new();
        f.write_text(&mut buf).unwrap();
        let back = ScalarField::read_text(&buf[..]).unwrap();
        assert_eq!(back.values, f.values);
        assert_eq!(back.grid.x.nodes, g.x.nodes);
    }
}
