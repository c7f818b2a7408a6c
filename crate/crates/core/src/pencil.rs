//! Hankel pencils and their generalized eigenvalues.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::Region;
use crate::signal::ReplicateSet;

/// Marker stored in place of eigenvalues whose denominator vanishes.
pub const INFINITE_EIGENVALUE: Complex64 = Complex64::new(f64::INFINITY, 0.0);

/// Relative size of `|beta|` below which an eigenvalue is treated as infinite.
pub const INFINITE_THRESHOLD: f64 = 1e-12;

/// The pair `(U1, U0)` of shifted `p x p` Hankel matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct HankelPencil {
    pub p: usize,
    pub u0: DMatrix<Complex64>,
    pub u1: DMatrix<Complex64>,
}

/// Generalized eigenvalues of one replicate's pencil.
///
/// Infinite eigenvalues are stored as [`INFINITE_EIGENVALUE`]; their residual
/// measures `|U0 v|` instead.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenSample {
    pub replicate_id: usize,
    pub eigenvalues: Vec<Complex64>,
    pub residuals: Vec<f64>,
    /// Right eigenvectors, one per column.
    pub eigenvectors: DMatrix<Complex64>,
}

impl EigenSample {
    pub fn finite(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.eigenvalues.iter().copied().filter(|z| z.is_finite())
    }
}

/// A pooled eigenvalue tagged with the replicate that produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledPoint {
    pub replicate: usize,
    pub z: Complex64,
}

pub fn build_pencil(samples: &[Complex64]) -> Result<HankelPencil> {
    let n = samples.len();
    if n < 2 || !n.is_multiple_of(2) {
        return Err(Error::OddSampleCount(n));
    }
    let p = n / 2;
    Ok(HankelPencil {
        p,
        u0: DMatrix::from_fn(p, p, |i, j| samples[i + j]),
        u1: DMatrix::from_fn(p, p, |i, j| samples[i + j + 1]),
    })
}

/// Solves `det(U1 - lambda U0) = 0` through the complex QZ decomposition.
pub fn generalized_eigenvalues(pencil: &HankelPencil, replicate_id: usize) -> Result<EigenSample> {
    let p = pencil.p;
    let n = p as i32;
    let mut a: Vec<Complex64> = pencil.u1.as_slice().to_vec();
    let mut b: Vec<Complex64> = pencil.u0.as_slice().to_vec();
    let mut alpha = vec![Complex64::default(); p];
    let mut beta = vec![Complex64::default(); p];
    let mut vl = vec![Complex64::default(); 1];
    let mut vr = vec![Complex64::default(); p * p];
    let mut rwork = vec![0.0; 8 * p];
    let mut info = 0;

    let mut query = [Complex64::default()];
    // SAFETY: all buffers are sized as LAPACK requires for an n x n problem.
    unsafe {
        lapack::zggev(
            b'N', b'V', n, &mut a, n, &mut b, n, &mut alpha, &mut beta, &mut vl, 1, &mut vr, n, &mut query, -1,
            &mut rwork, &mut info,
        );
    }
    let lwork = (query[0].re as usize).max(2 * p).max(1);
    let mut work = vec![Complex64::default(); lwork];
    // SAFETY: as above, with the workspace size LAPACK asked for.
    unsafe {
        lapack::zggev(
            b'N',
            b'V',
            n,
            &mut a,
            n,
            &mut b,
            n,
            &mut alpha,
            &mut beta,
            &mut vl,
            1,
            &mut vr,
            n,
            &mut work,
            lwork as i32,
            &mut rwork,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::NoConvergence {
            replicate: replicate_id,
            iterations: info.unsigned_abs() as usize,
        });
    }

    let norm0 = pencil.u0.norm();
    let norm1 = pencil.u1.norm();
    let vectors = DMatrix::from_column_slice(p, p, &vr);
    let mut eigenvalues = Vec::with_capacity(p);
    let mut residuals = Vec::with_capacity(p);
    for i in 0..p {
        let v = vectors.column(i);
        let vnorm = v.norm();
        if beta[i].norm() < INFINITE_THRESHOLD * norm0 {
            eigenvalues.push(INFINITE_EIGENVALUE);
            residuals.push((&pencil.u0 * v).norm() / (norm0 * vnorm).max(f64::MIN_POSITIVE));
            continue;
        }
        let lambda = alpha[i] / beta[i];
        let r = &pencil.u1 * v - (&pencil.u0 * v) * lambda;
        let scale = (norm1 + lambda.norm() * norm0) * vnorm;
        eigenvalues.push(lambda);
        residuals.push(r.norm() / scale.max(f64::MIN_POSITIVE));
    }
    Ok(EigenSample {
        replicate_id,
        eigenvalues,
        residuals,
        eigenvectors: vectors,
    })
}

/// Builds and solves the pencil of every replicate in parallel.
pub fn eigensolve_replicates(replicates: &ReplicateSet) -> Result<Vec<EigenSample>> {
    replicates
        .data
        .par_iter()
        .enumerate()
        .map(|(r, row)| generalized_eigenvalues(&build_pencil(row)?, r))
        .collect()
}

/// All finite eigenvalues inside `region`, tagged by replicate.
pub fn pool_eigenvalues(samples: &[EigenSample], region: &Region) -> Vec<PooledPoint> {
    samples
        .iter()
        .flat_map(|s| {
            s.finite().filter(|z| region.contains(*z)).map(move |z| PooledPoint {
                replicate: s.replicate_id,
                z,
            })
        })
        .collect()
}

/// Writes `replicate,index,re,im,residual` rows for every finite eigenvalue.
pub fn write_eigen_dump<W: Write>(samples: &[EigenSample], mut w: W) -> Result<()> {
    writeln!(w, "replicate,index,re,im,residual")?;
    for s in samples {
        for (i, (z, res)) in s.eigenvalues.iter().zip(&s.residuals).enumerate() {
            if z.is_finite() {
                writeln!(w, "{},{},{},{},{}", s.replicate_id, i, z.re, z.im, res)?;
            }
        }
    }
    Ok(())
}

/// Minimum-total-distance injective assignment of `truth` into `found`,
/// returning the largest matched distance.
///
/// Exhaustive search; meant for a handful of nodes.
pub fn matched_max_error(found: &[Complex64], truth: &[Complex64]) -> Option<f64> {
    fn search(
        found: &[Complex64],
        truth: &[Complex64],
        used: &mut Vec<bool>,
        total: f64,
        worst: f64,
        best: &mut Option<(f64, f64)>,
    ) {
        if let Some((bt, _)) = best {
            if total >= *bt {
                return;
            }
        }
        let Some((&t, rest)) = truth.split_first() else {
            *best = Some((total, worst));
            return;
        };
        for (i, f) in found.iter().enumerate() {
            if used[i] {
                continue;
            }
            let d = (f - t).norm();
            used[i] = true;
            search(found, rest, used, total + d, worst.max(d), best);
            used[i] = false;
        }
    }
    if truth.len() > found.len() {
        return None;
    }
    let mut best = None;
    search(found, truth, &mut vec![false; found.len()], 0.0, 0.0, &mut best);
    best.map(|(_, worst)| worst)
}
