mod common;

use common::*;
use nalgebra::DMatrix;
use outlier_core::gaussian::{gaussian_stats, shrink};
use outlier_core::linalg::SquareMatrix;
use outlier_core::{fit_gaussian_stats, ClusterModel, CovarianceMode, MahalanobisModel};
use proptest::prelude::*;
use rand::Rng;

fn to_square(m: &DMatrix<f64>) -> SquareMatrix {
    let n = m.nrows();
    SquareMatrix::from_vec(n, (0..n * n).map(|k| m[(k / n, k % n)]).collect()).unwrap()
}

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn explicit_inverse_oracle_per_cluster() {
    let mut r = rng(17);
    let d = 4;
    let means: Vec<Vec<f64>> = (0..3)
        .map(|_| (0..d).map(|_| 4.0 * normal(&mut r)).collect())
        .collect();
    let covs: Vec<DMatrix<f64>> = (0..3).map(|_| random_spd(&mut r, d)).collect();
    let sq: Vec<SquareMatrix> = covs.iter().map(to_square).collect();
    let model = MahalanobisModel::from_covariances(means.clone(), &sq, CovarianceMode::PerCluster)
        .unwrap();
    for _ in 0..200 {
        let z: Vec<f64> = (0..d).map(|_| 5.0 * normal(&mut r)).collect();
        let want = mahalanobis_inverse(&means, &covs, &z);
        let got = model.score(&z).unwrap();
        assert!(rel_close(got, want, 1e-9), "{got} vs {want}");
    }
}

#[test]
fn tied_equals_common_within_cluster_covariance() {
    let mut r = rng(3);
    // Dyadic offsets keep both translates exact in f32 storage.
    let q = |v: f64| (v * 1024.0).round() / 1024.0;
    let offsets: Vec<Vec<f64>> = (0..30)
        .map(|_| vec![q(normal(&mut r)), q(0.5 * normal(&mut r))])
        .collect();
    let mut rows = Vec::new();
    let mut assign = Vec::new();
    for (k, shift) in [5.0, -5.0].iter().enumerate() {
        for o in &offsets {
            rows.push(vec![o[0] + shift, o[1]]);
            assign.push(k);
        }
    }
    let f = matrix(&rows);
    let clusters = ClusterModel::from_assignments(&f, assign.clone()).unwrap();
    let stats = gaussian_stats(&f, &clusters, CovarianceMode::Tied).unwrap();
    let (_, pooled) = direct_tied_stats(&rows, &assign, 2);
    // Covariance of one cluster alone (both are translates of the same offsets).
    let (_, within) = direct_tied_stats(&rows[..30], &assign[..30], 1);
    let tied = &stats.covariances[0];
    for p in 0..2 {
        for q in 0..2 {
            assert!((tied[(p, q)] - pooled[p][q]).abs() < 1e-12);
            assert!((tied[(p, q)] - within[p][q]).abs() < 1e-9);
        }
    }
    // The global covariance would carry the ±5 separation (variance +25 on x).
    let (_, global) = direct_tied_stats(&rows, &vec![0; 60], 1);
    assert!(global[0][0] > tied[(0, 0)] + 20.0);
}

#[test]
fn factor_reproduces_shrunk_covariance() {
    let mut r = rng(8);
    let rows = gaussian_blob(&mut r, &[1.0, -2.0, 0.5, 3.0, 0.0], 2.0, 40);
    let f = matrix(&rows);
    let assign: Vec<usize> = (0..40).map(|i| i % 3).collect();
    let clusters = ClusterModel::from_assignments(&f, assign).unwrap();
    for mode in [CovarianceMode::Tied, CovarianceMode::PerCluster] {
        let lambda = 0.05;
        let stats = gaussian_stats(&f, &clusters, mode).unwrap();
        let model = fit_gaussian_stats(&f, &clusters, mode, lambda).unwrap();
        for (cov, fac) in stats.covariances.iter().zip(model.factors()) {
            let target = shrink(cov, lambda);
            let llt = fac.lower().mul_transpose();
            let scale = target.as_slice().iter().fold(0.0f64, |a, v| a.max(v.abs()));
            for (a, b) in llt.as_slice().iter().zip(target.as_slice()) {
                assert!((a - b).abs() <= 1e-8 * scale);
            }
            let l = fac.lower();
            assert!((0..l.dim()).all(|i| l[(i, i)] > 0.0));
        }
    }
}

#[test]
fn tied_single_cluster_is_plain_mahalanobis() {
    let mut r = rng(12);
    let rows = gaussian_blob(&mut r, &[0.0, 1.0, 2.0], 1.5, 50);
    let f = matrix(&rows);
    let clusters = ClusterModel::from_assignments(&f, vec![0; 50]).unwrap();
    let model = fit_gaussian_stats(&f, &clusters, CovarianceMode::Tied, 0.0).unwrap();
    let (means, cov) = direct_tied_stats(&rows, &vec![0; 50], 1);
    let cov = DMatrix::from_fn(3, 3, |i, j| cov[i][j]);
    for _ in 0..50 {
        let z: Vec<f64> = (0..3).map(|_| 3.0 * normal(&mut r)).collect();
        let want = mahalanobis_inverse(&means, std::slice::from_ref(&cov), &z);
        assert!(rel_close(model.score(&z).unwrap(), want, 1e-9));
    }
}

#[test]
fn affine_reparameterization_invariance() {
    let mut r = rng(44);
    let d = 4;
    let mut rows = Vec::new();
    for c in [[0.0; 4], [6.0, 0.0, 0.0, 0.0], [0.0, 6.0, 0.0, 6.0]] {
        rows.extend(gaussian_blob(&mut r, &c, 1.0, 30));
    }
    let assign: Vec<usize> = (0..90).map(|i| i / 30).collect();
    // Well-conditioned A = I + small perturbation, shift b.
    let a = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { 0.2 * normal(&mut r) });
    let b: Vec<f64> = (0..d).map(|_| normal(&mut r)).collect();
    let map = |z: &[f64]| -> Vec<f64> {
        (0..d)
            .map(|i| b[i] + (0..d).map(|j| a[(i, j)] * z[j]).sum::<f64>())
            .collect()
    };
    // Mapped rows are rounded to f32 storage; the tolerance absorbs that.
    let mapped = f32_exact(rows.iter().map(|z| map(z)).collect());
    for mode in [CovarianceMode::Tied, CovarianceMode::PerCluster] {
        let f0 = matrix(&rows);
        let f1 = matrix(&mapped);
        let m0 = fit_gaussian_stats(
            &f0,
            &ClusterModel::from_assignments(&f0, assign.clone()).unwrap(),
            mode,
            0.0,
        )
        .unwrap();
        let m1 = fit_gaussian_stats(
            &f1,
            &ClusterModel::from_assignments(&f1, assign.clone()).unwrap(),
            mode,
            0.0,
        )
        .unwrap();
        for _ in 0..30 {
            let z: Vec<f64> = (0..d).map(|_| 4.0 * normal(&mut r)).collect();
            let s0 = m0.score(&z).unwrap();
            let s1 = m1.score(&map(&z)).unwrap();
            assert!(rel_close(s0, s1, 1e-5), "{mode}: {s0} vs {s1}");
        }
    }
}

#[test]
fn affine_invariance_exact_inputs() {
    // Same property with f64-exact mapping: use an integer matrix and shift so
    // mapped rows of small-integer data stay exactly representable.
    let mut r = rng(45);
    let rows: Vec<Vec<f64>> = (0..60)
        .map(|_| (0..3).map(|_| r.random_range(-20i32..=20) as f64).collect())
        .collect();
    let a = [[2.0, 1.0, 0.0], [0.0, 1.0, -1.0], [1.0, 0.0, 3.0]];
    let b = [3.0, -1.0, 2.0];
    let map = |z: &[f64]| -> Vec<f64> {
        (0..3)
            .map(|i| b[i] + (0..3).map(|j| a[i][j] * z[j]).sum::<f64>())
            .collect()
    };
    let mapped: Vec<Vec<f64>> = rows.iter().map(|z| map(z)).collect();
    let assign: Vec<usize> = (0..60).map(|i| i % 2).collect();
    let f0 = matrix(&rows);
    let f1 = matrix(&mapped);
    let m0 = fit_gaussian_stats(&f0, &ClusterModel::from_assignments(&f0, assign.clone()).unwrap(), CovarianceMode::Tied, 0.0).unwrap();
    let m1 = fit_gaussian_stats(&f1, &ClusterModel::from_assignments(&f1, assign).unwrap(), CovarianceMode::Tied, 0.0).unwrap();
    for _ in 0..30 {
        let z: Vec<f64> = (0..3).map(|_| 10.0 * normal(&mut r)).collect();
        let (s0, s1) = (m0.score(&z).unwrap(), m1.score(&map(&z)).unwrap());
        assert!(rel_close(s0, s1, 1e-6), "{s0} vs {s1}");
    }
}

#[test]
fn batch_matches_scalar_and_preserves_order() {
    let mut r = rng(2);
    let rows = gaussian_blob(&mut r, &[0.0; 5], 1.0, 60);
    let f = matrix(&rows);
    let assign: Vec<usize> = (0..60).map(|i| i % 3).collect();
    let model = fit_gaussian_stats(
        &f,
        &ClusterModel::from_assignments(&f, assign).unwrap(),
        CovarianceMode::Tied,
        1e-3,
    )
    .unwrap();
    let batch = model.score_batch(&f).unwrap();
    for (i, s) in batch.iter().enumerate() {
        assert_eq!(s.to_bits(), model.score(&f.row_f64(i)).unwrap().to_bits());
    }
    let single = model.score_batch(&f.select_rows(&[7]).unwrap()).unwrap();
    assert_eq!(single[0].to_bits(), batch[7].to_bits());
    let perm: Vec<usize> = (0..60).rev().collect();
    let permuted = model.score_batch(&f.select_rows(&perm).unwrap()).unwrap();
    for (k, &i) in perm.iter().enumerate() {
        assert_eq!(permuted[k].to_bits(), batch[i].to_bits());
    }
    // Means score zero.
    let means = outlier_core::FeatureMatrix::from_rows(model.means()).unwrap();
    let exact = MahalanobisModel::from_covariances(
        (0..means.rows()).map(|i| means.row_f64(i)).collect(),
        &[SquareMatrix::identity(5)],
        CovarianceMode::Tied,
    )
    .unwrap();
    assert!(exact.score_batch(&means).unwrap().iter().all(|&s| s == 0.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scores_nonnegative_and_zero_at_means(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let rows = gaussian_blob(&mut r, &[0.0; 3], 1.0, 12);
        let f = matrix(&rows);
        let assign: Vec<usize> = (0..12).map(|i| i % 2).collect();
        let model = fit_gaussian_stats(
            &f,
            &ClusterModel::from_assignments(&f, assign).unwrap(),
            CovarianceMode::PerCluster,
            1e-3,
        ).unwrap();
        for m in model.means() {
            prop_assert_eq!(model.score(m).unwrap(), 0.0);
        }
        for _ in 0..10 {
            let z: Vec<f64> = (0..3).map(|_| 3.0 * normal(&mut r)).collect();
            prop_assert!(model.score(&z).unwrap() > 0.0);
        }
    }

    #[test]
    fn monotone_along_rays(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let rows = gaussian_blob(&mut r, &[1.0, -1.0, 0.0, 2.0], 1.0, 20);
        let f = matrix(&rows);
        let model = fit_gaussian_stats(
            &f,
            &ClusterModel::from_assignments(&f, vec![0; 20]).unwrap(),
            CovarianceMode::Tied,
            1e-3,
        ).unwrap();
        let mu = model.means()[0].clone();
        let v: Vec<f64> = (0..4).map(|_| normal(&mut r)).collect();
        let at = |t: f64| -> f64 {
            let z: Vec<f64> = mu.iter().zip(&v).map(|(m, d)| m + t * d).collect();
            model.score(&z).unwrap()
        };
        let mut prev = 0.0;
        for k in 1..20 {
            let t = k as f64 * 0.25;
            let (pos, neg) = (at(t), at(-t));
            prop_assert!(pos > prev && neg > prev);
            prev = pos.min(neg);
        }
    }
}
