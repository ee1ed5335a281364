//! Test data generators and brute-force oracles. Nothing here calls into the
//! code paths it is used to check.
#![allow(dead_code, clippy::needless_range_loop, clippy::type_complexity)]

use nalgebra::{DMatrix, DVector};
use outlier_core::FeatureMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Rows of `f64` that are exactly representable in `f32`, so oracle and
/// implementation see identical inputs.
pub fn f32_exact(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    rows.into_iter()
        .map(|r| r.into_iter().map(|v| v as f32 as f64).collect())
        .collect()
}

pub fn matrix(rows: &[Vec<f64>]) -> FeatureMatrix {
    FeatureMatrix::from_rows(rows).unwrap()
}

/// `n` rows around `center` with iid N(0, sd²) noise, rounded to `f32`.
pub fn gaussian_blob(rng: &mut impl Rng, center: &[f64], sd: f64, n: usize) -> Vec<Vec<f64>> {
    f32_exact(
        (0..n)
            .map(|_| center.iter().map(|c| c + sd * normal(rng)).collect())
            .collect(),
    )
}

/// Random symmetric positive-definite D×D matrix `A·Aᵀ + 0.5·I`.
pub fn random_spd(rng: &mut impl Rng, d: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(d, d, |_, _| normal(rng));
    &a * a.transpose() + DMatrix::identity(d, d) * 0.5
}

/// `O(n_in · n_out)` pair count with half credit for ties.
pub fn auroc_pairs(inl: &[f64], out: &[f64]) -> f64 {
    let mut credit = 0.0;
    for &o in out {
        for &i in inl {
            if o > i {
                credit += 1.0;
            } else if o == i {
                credit += 0.5;
            }
        }
    }
    credit / (inl.len() * out.len()) as f64
}

/// `min_m (z − μ_m)ᵀ Σ_m⁻¹ (z − μ_m)` with explicit LU inverses.
pub fn mahalanobis_inverse(means: &[Vec<f64>], covs: &[DMatrix<f64>], z: &[f64]) -> f64 {
    let z = DVector::from_column_slice(z);
    means
        .iter()
        .enumerate()
        .map(|(m, mu)| {
            let cov = if covs.len() == 1 { &covs[0] } else { &covs[m] };
            let inv = cov.clone().try_inverse().expect("invertible");
            let d = &z - DVector::from_column_slice(mu);
            (d.transpose() * inv * &d)[(0, 0)]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Means and tied (1/N) covariance by direct double summation.
pub fn direct_tied_stats(rows: &[Vec<f64>], assign: &[usize], m: usize) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let d = rows[0].len();
    let mut means = vec![vec![0.0; d]; m];
    let mut counts = vec![0usize; m];
    for (r, &a) in rows.iter().zip(assign) {
        counts[a] += 1;
        for j in 0..d {
            means[a][j] += r[j];
        }
    }
    for k in 0..m {
        for j in 0..d {
            means[k][j] /= counts[k] as f64;
        }
    }
    let mut cov = vec![vec![0.0; d]; d];
    for p in 0..d {
        for q in 0..d {
            let mut s = 0.0;
            for (r, &a) in rows.iter().zip(assign) {
                s += (r[p] - means[a][p]) * (r[q] - means[a][q]);
            }
            cov[p][q] = s / rows.len() as f64;
        }
    }
    (means, cov)
}

/// Scalar bilinear upsampling of one channel with clamped neighbours,
/// source coordinate `(dst + 0.5)·in/out − 0.5`. Only valid for `out ≥ in`.
pub fn bilinear_oracle(src: &[f64], h: usize, w: usize, c: usize, oh: usize, ow: usize) -> Vec<f64> {
    let coord = |dst: usize, n_in: usize, n_out: usize| -> (usize, usize, f64) {
        let s = (dst as f64 + 0.5) * n_in as f64 / n_out as f64 - 0.5;
        let f = s.floor();
        let t = s - f;
        let clamp = |v: f64| v.max(0.0).min((n_in - 1) as f64) as usize;
        (clamp(f), clamp(f + 1.0), t)
    };
    let mut out = vec![0.0; oh * ow * c];
    for y in 0..oh {
        let (y0, y1, ty) = coord(y, h, oh);
        for x in 0..ow {
            let (x0, x1, tx) = coord(x, w, ow);
            for ch in 0..c {
                let p = |yy: usize, xx: usize| src[(yy * w + xx) * c + ch];
                let top = (1.0 - tx) * p(y0, x0) + tx * p(y0, x1);
                let bot = (1.0 - tx) * p(y1, x0) + tx * p(y1, x1);
                out[(y * ow + x) * c + ch] = (1.0 - ty) * top + ty * bot;
            }
        }
    }
    out
}

/// Naive KDE negative log-density without any stabilization.
pub fn kde_naive(train: &[Vec<f64>], h: f64, z: &[f64]) -> f64 {
    let d = z.len() as f64;
    let norm = (2.0 * std::f64::consts::PI * h * h).powf(-d / 2.0);
    let dens: f64 = train
        .iter()
        .map(|t| {
            let d2: f64 = t.iter().zip(z).map(|(a, b)| (a - b).powi(2)).sum();
            norm * (-d2 / (2.0 * h * h)).exp()
        })
        .sum::<f64>()
        / train.len() as f64;
    -dens.ln()
}

/// `1 − max_i cos(z, t_i)` by exhaustive pairwise evaluation.
pub fn cosine_oracle(train: &[Vec<f64>], z: &[f64]) -> f64 {
    let nz = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    let best = train
        .iter()
        .map(|t| {
            let nt = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            t.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / (nt * nz)
        })
        .fold(f64::NEG_INFINITY, f64::max);
    1.0 - best
}

/// Inliers from a mixture of `k` Gaussians (unit noise) in `d` dimensions,
/// outliers from the same mixture shifted by `shift` along every axis.
pub fn mixture_with_shift(
    seed: u64,
    d: usize,
    k: usize,
    n_train: usize,
    n_test: usize,
    shift: f64,
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let mut r = rng(seed);
    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| 3.0 * normal(&mut r)).collect())
        .collect();
    let draw = |n: usize, offset: f64, r: &mut ChaCha8Rng| -> Vec<Vec<f64>> {
        f32_exact(
            (0..n)
                .map(|i| {
                    let c = &centers[i % k];
                    c.iter().map(|v| v + offset + normal(r)).collect()
                })
                .collect(),
        )
    };
    let train = draw(n_train, 0.0, &mut r);
    let test_in = draw(n_test, 0.0, &mut r);
    let test_out = draw(n_test, shift, &mut r);
    (train, test_in, test_out)
}
