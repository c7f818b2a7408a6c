//! k-means grouping of pooled eigenvalues into per-component clusters.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;

use crate::error::{Error, Result};
use crate::grid::Region;
use crate::pencil::PooledPoint;
use crate::rng::RngConfig;

pub const MAX_LLOYD_ITERATIONS: usize = 500;
pub const CENTER_TOLERANCE: f64 = 1e-10;

/// One replicate's representative in a cluster.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Representative {
    pub replicate: usize,
    pub z: Complex64,
    /// The replicate had no point in this cluster; `z` is the cluster center.
    pub standin: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterSet {
    pub k: usize,
    pub centers: Vec<Complex64>,
    /// Cluster index of every pooled point, in input order.
    pub assignment: Vec<usize>,
    /// `members[j][r]` is replicate `r`'s representative in cluster `j`.
    pub members: Vec<Vec<Representative>>,
    /// Pilot bandwidths `t_hat_j`.
    pub variances: Vec<f64>,
    /// Pooled points assigned to each cluster.
    pub member_counts: Vec<usize>,
    /// Within-cluster sum of squares after every Lloyd assignment step.
    pub wcss_history: Vec<f64>,
}

impl ClusterSet {
    pub fn standin_count(&self, j: usize) -> usize {
        self.members[j].iter().filter(|m| m.standin).count()
    }

    /// Writes `cluster,center_re,center_im,t_hat,member_count,standin_count` rows.
    pub fn write_report<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "cluster,center_re,center_im,t_hat,member_count,standin_count")?;
        for j in 0..self.k {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                j,
                self.centers[j].re,
                self.centers[j].im,
                self.variances[j],
                self.member_counts[j],
                self.standin_count(j)
            )?;
        }
        Ok(())
    }
}

/// Lower bound on pilot bandwidths: `1e-6` times the squared region diagonal.
pub fn variance_floor(region: &Region) -> f64 {
    1e-6 * region.diagonal_sq()
}

/// Complex variance about the mean, replaced by `floor` for fewer than two
/// members or a smaller spread.
pub fn cluster_variance(members: &[Complex64], floor: f64) -> f64 {
    if members.len() < 2 {
        return floor;
    }
    let m = members.len() as f64;
    let mean = members.iter().sum::<Complex64>() / m;
    let t = members.iter().map(|z| (z - mean).norm_sqr()).sum::<f64>() / m;
    if t < floor {
        floor
    } else {
        t
    }
}

fn nearest_center(z: Complex64, centers: &[Complex64]) -> (usize, f64) {
    centers
        .iter()
        .enumerate()
        .map(|(j, c)| (j, (z - c).norm_sqr()))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn seed_centers(points: &[Complex64], k: usize, rng: &RngConfig) -> Vec<Complex64> {
    let mut g = rng.substream(&[0]);
    let mut centers = vec![points[g.random_range(0..points.len())]];
    while centers.len() < k {
        let d2: Vec<f64> = points.iter().map(|&z| nearest_center(z, &centers).1).collect();
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut u = g.random::<f64>() * total;
            let mut pick = points.len() - 1;
            for (i, d) in d2.iter().enumerate() {
                if u < *d {
                    pick = i;
                    break;
                }
                u -= d;
            }
            pick
        } else {
            g.random_range(0..points.len())
        };
        centers.push(points[next]);
    }
    centers
}

/// Lloyd's k-means with k-means++ seeding, followed by per-replicate
/// representative selection for `replicates` replicates.
pub fn kmeans(points: &[PooledPoint], k: usize, replicates: usize, floor: f64, rng: &RngConfig) -> Result<ClusterSet> {
    if k == 0 || points.len() < k {
        return Err(Error::TooFewPoints {
            k,
            points: points.len(),
        });
    }
    let zs: Vec<Complex64> = points.iter().map(|p| p.z).collect();
    let mut centers = seed_centers(&zs, k, rng);
    let mut assignment = vec![0; zs.len()];
    let mut wcss_history = Vec::new();
    for _ in 0..MAX_LLOYD_ITERATIONS {
        let mut wcss = 0.0;
        for (a, &z) in assignment.iter_mut().zip(&zs) {
            let (j, d) = nearest_center(z, &centers);
            *a = j;
            wcss += d;
        }
        wcss_history.push(wcss);
        let mut sums = vec![Complex64::default(); k];
        let mut counts = vec![0usize; k];
        for (&j, &z) in assignment.iter().zip(&zs) {
            sums[j] += z;
            counts[j] += 1;
        }
        let mut shift: f64 = 0.0;
        for j in 0..k {
            if counts[j] > 0 {
                let c = sums[j] / counts[j] as f64;
                shift = shift.max((c - centers[j]).norm());
                centers[j] = c;
            }
        }
        if shift < CENTER_TOLERANCE {
            break;
        }
    }
    for (a, &z) in assignment.iter_mut().zip(&zs) {
        *a = nearest_center(z, &centers).0;
    }

    let mut members = Vec::with_capacity(k);
    let mut variances = Vec::with_capacity(k);
    let mut member_counts = Vec::with_capacity(k);
    for (j, &center) in centers.iter().enumerate() {
        let mine: Vec<&PooledPoint> = points
            .iter()
            .zip(&assignment)
            .filter(|(_, &a)| a == j)
            .map(|(p, _)| p)
            .collect();
        let reps = (0..replicates)
            .map(|r| {
                mine.iter()
                    .filter(|p| p.replicate == r)
                    .min_by(|a, b| (a.z - center).norm_sqr().total_cmp(&(b.z - center).norm_sqr()))
                    .map(|p| Representative {
                        replicate: r,
                        z: p.z,
                        standin: false,
                    })
                    .unwrap_or(Representative {
                        replicate: r,
                        z: center,
                        standin: true,
                    })
            })
            .collect();
        let values: Vec<Complex64> = mine.iter().map(|p| p.z).collect();
        variances.push(cluster_variance(&values, floor));
        member_counts.push(mine.len());
        members.push(reps);
    }
    Ok(ClusterSet {
        k,
        centers,
        assignment,
        members,
        variances,
        member_counts,
        wcss_history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(r: usize, re: f64, im: f64) -> PooledPoint {
        PooledPoint {
            replicate: r,
            z: Complex64::new(re, im),
        }
    }

    #[test]
    fn variance_examples() {
        let z = Complex64::new(0.3, 0.1);
        assert_eq!(cluster_variance(&[z, z, z], 1e-6), 1e-6);
        let two = [Complex64::new(0.0, 0.0), Complex64::new(2.0, 0.0)];
        assert!((cluster_variance(&two, 1e-6) - 1.0).abs() < 1e-15);
        assert_eq!(cluster_variance(&[z], 0.5), 0.5);
    }

    #[test]
    fn separated_clouds() {
        let mut pts = Vec::new();
        for r in 0..5 {
            let e = 0.01 * r as f64;
            pts.push(pt(r, e, -e));
            pts.push(pt(r, 10.0 + e, 10.0 - e));
        }
        let cs = kmeans(&pts, 2, 5, 1e-9, &RngConfig::new(3, "km")).unwrap();
        let first = cs.assignment[0];
        for (i, a) in cs.assignment.iter().enumerate() {
            assert_eq!(*a == first, i % 2 == 0);
        }
        assert!(cs.members.iter().all(|m| m.iter().all(|r| !r.standin)));
        assert_eq!(cs.member_counts, vec![5, 5]);
    }

    #[test]
    fn singleton_clusters_use_floor_and_standins() {
        let pts = vec![pt(0, 0.0, 0.0), pt(0, 1.0, 0.0), pt(0, 0.0, 1.0)];
        let cs = kmeans(&pts, 3, 2, 1e-4, &RngConfig::new(1, "km")).unwrap();
        assert!(cs.variances.iter().all(|&v| v == 1e-4));
        for j in 0..3 {
            assert_eq!(cs.standin_count(j), 1);
            assert_eq!(cs.members[j][1].z, cs.centers[j]);
        }
    }

    #[test]
    fn too_many_clusters() {
        let pts = vec![pt(0, 0.0, 0.0)];
        assert!(matches!(
            kmeans(&pts, 2, 1, 1e-6, &RngConfig::new(1, "km")),
            Err(Error::TooFewPoints { .. })
        ));
    }

    #[test]
    fn report_has_one_row_per_cluster() {
        let pts = vec![pt(0, 0.0, 0.0), pt(1, 5.0, 0.0)];
        let cs = kmeans(&pts, 2, 2, 1e-6, &RngConfig::new(1, "km")).unwrap();
        let mut buf = Vec::new();
        cs.write_report(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 3);
        assert!(text.lines().nth(1).unwrap().ends_with(",1,1"));
    }
}
