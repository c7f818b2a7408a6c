//! Property tests for the invariants of each stage.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use proptest::prelude::*;

use pencil_kde::analytic::h2_with_rho;
use pencil_kde::bandwidth::{combine, optimal_t, DensityEstimate};
use pencil_kde::cluster::kmeans;
use pencil_kde::diffusion::{deposit_with, mass, Deposition};
use pencil_kde::fields::{stationary_density, ProjectionWorkspace, RadialProfile};
use pencil_kde::pencil::pool_eigenvalues;
use pencil_kde::pilot::{pilot_potential, relative_maxima, PilotConfig};
use pencil_kde::signal::add_noise;
use pencil_kde::{ChebGrid, EigenSample, ExponentialModel, PooledPoint, Region, ReplicateSet, RngConfig, ScalarField};

fn complex(range: f64) -> impl Strategy<Value = Complex64> {
    (-range..range, -range..range).prop_map(|(re, im)| Complex64::new(re, im))
}

fn unit_disk_point() -> impl Strategy<Value = Complex64> {
    (0.3f64..1.05, -PI..PI).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

fn grid() -> Arc<ChebGrid> {
    ChebGrid::new(Region::new(-1.2, 1.2, -1.2, 1.2).unwrap(), 14, 14).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn synthesis_is_linear_in_coefficients(
        nodes in prop::collection::vec(unit_disk_point(), 1..4),
        a in prop::collection::vec(complex(2.0), 3),
        b in prop::collection::vec(complex(2.0), 3),
        w in complex(1.5),
    ) {
        let p = nodes.len();
        let n = 2 * p + 2;
        let ma = ExponentialModel::new(a[..p].to_vec(), nodes.clone(), n, 0.0).unwrap().synthesize();
        let mb = ExponentialModel::new(b[..p].to_vec(), nodes.clone(), n, 0.0).unwrap().synthesize();
        let mix: Vec<Complex64> = (0..p).map(|j| a[j] + w * b[j]).collect();
        let mm = ExponentialModel::new(mix, nodes, n, 0.0).unwrap().synthesize();
        for k in 0..n {
            let want = ma[k] + w * mb[k];
            prop_assert!((mm[k] - want).norm() <= 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn pooling_partitions_the_region(
        eig in prop::collection::vec(prop::collection::vec(complex(1.5), 4), 1..5),
        split in -0.9f64..0.9,
    ) {
        let samples: Vec<EigenSample> = eig
            .iter()
            .enumerate()
            .map(|(r, e)| EigenSample {
                replicate_id: r,
                eigenvalues: e.clone(),
                residuals: vec![0.0; e.len()],
                eigenvectors: nalgebra::DMatrix::zeros(0, 0),
            })
            .collect();
        let whole = Region::new(-1.0, 1.0, -1.0, 1.0).unwrap();
        let left = Region::new(-1.0, split, -1.0, 1.0).unwrap();
        let right = Region::new(split, 1.0, -1.0, 1.0).unwrap();
        let all = pool_eigenvalues(&samples, &whole);
        let l = pool_eigenvalues(&samples, &left);
        let r = pool_eigenvalues(&samples, &right);
        let on_split = all.iter().filter(|p| p.z.re == split).count();
        prop_assert_eq!(l.len() + r.len(), all.len() + on_split);
        prop_assert!(all.iter().all(|p| whole.contains(p.z)));
    }

    #[test]
    fn lloyd_wcss_never_increases(
        pts in prop::collection::vec(complex(1.0), 6..30),
        k in 1usize..4,
        seed in any::<u64>(),
    ) {
        let pooled: Vec<PooledPoint> = pts.iter().enumerate().map(|(i, &z)| PooledPoint { replicate: i % 3, z }).collect();
        let set = kmeans(&pooled, k, 3, 1e-9, &RngConfig::new(seed, "prop")).unwrap();
        for w in set.wcss_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-15);
        }
        prop_assert_eq!(set.members.iter().map(|m| m.len()).collect::<Vec<_>>(), vec![3; k]);
    }

    #[test]
    fn kmeans_is_deterministic(pts in prop::collection::vec(complex(1.0), 5..20), seed in any::<u64>()) {
        let pooled: Vec<PooledPoint> = pts.iter().enumerate().map(|(i, &z)| PooledPoint { replicate: i % 2, z }).collect();
        let a = kmeans(&pooled, 2, 2, 1e-9, &RngConfig::new(seed, "det")).unwrap();
        let b = kmeans(&pooled, 2, 2, 1e-9, &RngConfig::new(seed, "det")).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn residual_is_nonnegative_and_phase_invariant(
        s in prop::collection::vec(complex(3.0), 8),
        fixed in prop::collection::vec(unit_disk_point(), 0..3),
        z in complex(1.3),
        theta in -PI..PI,
    ) {
        let ws = ProjectionWorkspace::new(&s, &fixed);
        let nu = ws.nu(z);
        let scale: f64 = s.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!(nu >= 0.0);
        prop_assert!(nu <= scale * (1.0 + 1e-12));
        let rot = Complex64::from_polar(1.0, theta);
        let turned: Vec<Complex64> = s.iter().map(|v| v * rot).collect();
        let nu_rot = ProjectionWorkspace::new(&turned, &fixed).nu(z);
        prop_assert!((nu - nu_rot).abs() <= 1e-10 * scale.max(1.0));
    }

    #[test]
    fn two_sample_density_is_rotation_invariant(
        rho in 0.1f64..30.0,
        xi in unit_disk_point(),
        z in complex(2.0),
        theta in -PI..PI,
    ) {
        let rot = Complex64::from_polar(1.0, theta);
        let a = h2_with_rho(rho, xi, z);
        let b = h2_with_rho(rho, xi * rot, z * rot);
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1e-300));
    }

    #[test]
    fn bandwidth_scales_as_cube_root(eg in 1e-6f64..1e6, l in 1e-6f64..1e6, r in 1usize..50) {
        let t = optimal_t(eg, l, r).unwrap();
        let t8 = optimal_t(8.0 * eg, l, r).unwrap();
        prop_assert!((t8 - 2.0 * t).abs() <= 1e-12 * t8);
        prop_assert!(t > 0.0);
    }

    #[test]
    fn deposition_conserves_mass(
        pts in prop::collection::vec(complex(1.1), 1..12),
        cubic in any::<bool>(),
    ) {
        let g = grid();
        let p = stationary_density(&g, RadialProfile::Cauchy).unwrap();
        let scheme = if cubic { Deposition::LocalCubic } else { Deposition::NearestNode };
        let phi = deposit_with(&pts, pts.len(), &g, &p, scheme).unwrap();
        prop_assert!((mass(&phi, &p.field) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn single_cluster_combination_is_identity(v in prop::collection::vec(0.0f64..5.0, 196)) {
        let g = grid();
        let field = ScalarField { grid: g.clone(), values: nalgebra::DMatrix::from_row_slice(14, 14, &v) };
        let est = DensityEstimate::new(field.clone(), vec![(0, 0.1)]);
        let out = combine(&[est], 2).unwrap();
        prop_assert_eq!(out.field.values, field.values);
    }

    #[test]
    fn maxima_above_full_threshold_are_unique(v in prop::collection::vec(-1.0f64..1.0, 196)) {
        let g = grid();
        let field = ScalarField { grid: g, values: nalgebra::DMatrix::from_row_slice(14, 14, &v) };
        prop_assert!(relative_maxima(&field, 1.0).len() <= 1);
        let all = relative_maxima(&field, 0.0);
        for w in all.windows(2) {
            prop_assert!(w[0].value >= w[1].value);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn pilot_is_phase_invariant(seed in any::<u64>(), theta in -PI..PI) {
        let model = ExponentialModel::new(
            vec![Complex64::new(2.0, 0.0), Complex64::new(1.0, 0.5)],
            vec![Complex64::from_polar(0.95, 0.7), Complex64::from_polar(0.9, -1.9)],
            8,
            0.3,
        )
        .unwrap();
        let reps = add_noise(&model.synthesize(), 0.3, 3, &RngConfig::new(seed, "pilot")).unwrap();
        let rot = Complex64::from_polar(1.0, theta);
        let turned = ReplicateSet::from_rows(
            reps.data.iter().map(|row| row.iter().map(|v| v * rot).collect()).collect(),
            reps.sigma,
        )
        .unwrap();
        let g = ChebGrid::new(Region::new(-1.0, 1.0, -1.0, 1.0).unwrap(), 8, 8).unwrap();
        let cfg = PilotConfig::for_model(8, 0.3);
        let a = pilot_potential(&reps, &g, &cfg).unwrap();
        let b = pilot_potential(&turned, &g, &cfg).unwrap();
        let diff = (&a.values - &b.values).amax();
        prop_assert!(diff <= 1e-9 * a.values.amax().max(1.0));
    }

    #[test]
    fn noiseless_replicates_are_identical(seed in any::<u64>(), r in 1usize..6) {
        let m = ExponentialModel::reference(12, 0.0).unwrap();
        let reps = add_noise(&m.synthesize(), 0.0, r, &RngConfig::new(seed, "quiet")).unwrap();
        for row in &reps.data {
            prop_assert_eq!(row, &reps.data[0]);
        }
    }
}
