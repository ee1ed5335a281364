//! Cluster-conditional Gaussian detector scored by minimum Mahalanobis distance.
//!
//! For clusters `m = 1..M` with `N_m` training rows each:
//!
//! ```text
//! μ_m   = (1/N_m) Σ_{i ∈ m} z_i
//! Σ     = (1/N)   Σ_m Σ_{i ∈ m} (z_i − μ_m)(z_i − μ_m)ᵀ        (tied)
//! Σ_m   = (1/N_m) Σ_{i ∈ m} (z_i − μ_m)(z_i − μ_m)ᵀ          (per-cluster)
//! s(z)  = min_m (z − μ_m)ᵀ Σ⁻¹ (z − μ_m)
//! ```
//!
//! Each covariance is shrunk to `Σ + λ·c̄·I` (`c̄` = mean diagonal of `Σ`, or 1
//! when that is zero) and stored as its Cholesky factor. The score is the
//! squared distance: higher means more outlier-like. Note the sign: a
//! "likelihood" style score would be the negation of this distance.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cluster::ClusterModel;
use crate::error::{Error, Result};
use crate::features::{read_features, write_features, FeatureMatrix};
use crate::linalg::{Cholesky, SquareMatrix};

pub const DEFAULT_SHRINKAGE: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CovarianceMode {
    Tied,
    PerCluster,
}

impl FromStr for CovarianceMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "tied" => Ok(Self::Tied),
            "percluster" | "per-cluster" => Ok(Self::PerCluster),
            other => Err(format!("unknown covariance mode {other:?}")),
        }
    }
}

impl fmt::Display for CovarianceMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Tied => "tied",
            Self::PerCluster => "percluster",
        })
    }
}

/// Fitted min-Mahalanobis detector.
#[derive(Debug, Clone)]
pub struct MahalanobisModel {
    means: Vec<Vec<f64>>,
    mode: CovarianceMode,
    /// One factor in tied mode, M in per-cluster mode.
    factors: Vec<Cholesky>,
    shrinkage: f64,
    dim: usize,
    counts: Vec<usize>,
}

/// Unshrunk covariance estimates, useful for inspection and testing.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    pub means: Vec<Vec<f64>>,
    pub counts: Vec<usize>,
    /// One matrix in tied mode, M in per-cluster mode.
    pub covariances: Vec<SquareMatrix>,
}

/// Computes cluster means and (tied or per-cluster) ML covariances.
pub fn gaussian_stats(
    features: &FeatureMatrix,
    clusters: &ClusterModel,
    mode: CovarianceMode,
) -> Result<GaussianStats> {
    let n = features.rows();
    let d = features.cols();
    if clusters.assignments.len() != n {
        return Err(Error::LabelCount {
            labels: clusters.assignments.len(),
            rows: n,
        });
    }
    let m = clusters.components();
    let mut counts = vec![0usize; m];
    let mut means = vec![vec![0.0f64; d]; m];
    for (row, &a) in features.iter_rows().zip(&clusters.assignments) {
        if a >= m {
            return Err(Error::InvalidParameter(format!(
                "assignment {a} out of range for {m} clusters"
            )));
        }
        counts[a] += 1;
        for (s, &x) in means[a].iter_mut().zip(row) {
            *s += x as f64;
        }
    }
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        return Err(Error::EmptyCluster(k));
    }
    if mode == CovarianceMode::PerCluster {
        if let Some(k) = counts.iter().position(|&c| c < 2) {
            return Err(Error::InvalidParameter(format!(
                "per-cluster covariance needs at least 2 rows per cluster; cluster {k} has {}",
                counts[k]
            )));
        }
    }
    for (mean, &c) in means.iter_mut().zip(&counts) {
        mean.iter_mut().for_each(|v| *v /= c as f64);
    }

    let slots = match mode {
        CovarianceMode::Tied => 1,
        CovarianceMode::PerCluster => m,
    };
    let mut scatter = vec![SquareMatrix::zeros(d); slots];
    let mut centered = vec![0.0; d];
    for (row, &a) in features.iter_rows().zip(&clusters.assignments) {
        for ((c, &x), &mu) in centered.iter_mut().zip(row).zip(&means[a]) {
            *c = x as f64 - mu;
        }
        let slot = if mode == CovarianceMode::Tied { 0 } else { a };
        scatter[slot].syr_lower(&centered);
    }
    for (k, s) in scatter.iter_mut().enumerate() {
        s.symmetrize_from_lower();
        let denom = match mode {
            CovarianceMode::Tied => n,
            CovarianceMode::PerCluster => counts[k],
        };
        s.scale(1.0 / denom as f64);
    }
    Ok(GaussianStats {
        means,
        counts,
        covariances: scatter,
    })
}

/// Returns `Σ + λ·c̄·I`, with `c̄` the mean diagonal of `Σ` (1 if that is zero).
pub fn shrink(cov: &SquareMatrix, lambda: f64) -> SquareMatrix {
    let mut out = cov.clone();
    let mut cbar = cov.mean_diagonal();
    if cbar == 0.0 {
        cbar = 1.0;
    }
    out.add_to_diagonal(lambda * cbar);
    out
}

/// Fits the detector on `features` partitioned by `clusters`.
pub fn fit_gaussian_stats(
    features: &FeatureMatrix,
    clusters: &ClusterModel,
    mode: CovarianceMode,
    lambda: f64,
) -> Result<MahalanobisModel> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(Error::InvalidParameter(format!(
            "shrinkage must be finite and >= 0, got {lambda}"
        )));
    }
    let stats = gaussian_stats(features, clusters, mode)?;
    let factors = stats
        .covariances
        .par_iter()
        .map(|c| Cholesky::factor(&shrink(c, lambda)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MahalanobisModel {
        dim: features.cols(),
        means: stats.means,
        mode,
        factors,
        shrinkage: lambda,
        counts: stats.counts,
    })
}

impl MahalanobisModel {
    /// Builds a model from explicit means and (already regularized) covariances.
    /// Tied mode takes exactly one covariance, per-cluster mode one per mean.
    pub fn from_covariances(
        means: Vec<Vec<f64>>,
        covariances: &[SquareMatrix],
        mode: CovarianceMode,
    ) -> Result<Self> {
        let factors = covariances
            .iter()
            .map(Cholesky::factor)
            .collect::<Result<Vec<_>>>()?;
        Self::from_factors(means, factors, mode, 0.0, None)
    }

    fn from_factors(
        means: Vec<Vec<f64>>,
        factors: Vec<Cholesky>,
        mode: CovarianceMode,
        shrinkage: f64,
        counts: Option<Vec<usize>>,
    ) -> Result<Self> {
        let dim = means.first().map(Vec::len).ok_or_else(|| {
            Error::InvalidParameter("model needs at least one cluster mean".into())
        })?;
        if let Some(bad) = means.iter().find(|m| m.len() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: bad.len(),
            });
        }
        let expected = match mode {
            CovarianceMode::Tied => 1,
            CovarianceMode::PerCluster => means.len(),
        };
        if factors.len() != expected {
            return Err(Error::InvalidParameter(format!(
                "{mode} mode needs {expected} covariance factor(s), got {}",
                factors.len()
            )));
        }
        if let Some(f) = factors.iter().find(|f| f.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: f.dim(),
            });
        }
        let counts = counts.unwrap_or_else(|| vec![0; means.len()]);
        Ok(Self {
            means,
            mode,
            factors,
            shrinkage,
            dim,
            counts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> usize {
        self.means.len()
    }

    pub fn mode(&self) -> CovarianceMode {
        self.mode
    }

    pub fn shrinkage(&self) -> f64 {
        self.shrinkage
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn factors(&self) -> &[Cholesky] {
        &self.factors
    }

    /// Factor used for cluster `m`.
    pub fn factor_for(&self, m: usize) -> &Cholesky {
        match self.mode {
            CovarianceMode::Tied => &self.factors[0],
            CovarianceMode::PerCluster => &self.factors[m],
        }
    }

    fn check_dim(&self, z: &[f64]) -> Result<()> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        Ok(())
    }

    /// Squared Mahalanobis distance to every cluster mean.
    pub fn distances(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(z)?;
        let mut diff = vec![0.0; self.dim];
        let mut scratch = Vec::with_capacity(self.dim);
        Ok((0..self.means.len())
            .map(|m| {
                for ((d, &x), &mu) in diff.iter_mut().zip(z).zip(&self.means[m]) {
                    *d = x - mu;
                }
                self.factor_for(m).quadratic_form(&diff, &mut scratch)
            })
            .collect())
    }

    /// Closest cluster under the Mahalanobis metric and its distance; ties go
    /// to the lowest index.
    pub fn nearest(&self, z: &[f64]) -> Result<(usize, f64)> {
        let d = self.distances(z)?;
        let mut best = (0, d[0]);
        for (m, &v) in d.iter().enumerate().skip(1) {
            if v < best.1 {
                best = (m, v);
            }
        }
        Ok(best)
    }

    /// Minimum squared Mahalanobis distance over clusters.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        self.nearest(z).map(|(_, s)| s)
    }

    /// Scores every row of `features`, preserving order.
    pub fn score_batch(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        if features.cols() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: features.cols(),
            });
        }
        (0..features.rows())
            .into_par_iter()
            .map(|i| self.score(&features.row_f64(i)))
            .collect()
    }

    /// Gradient of `s(z)` with respect to `z` at the closest cluster `m̂`:
    /// `2·Σ⁻¹·(z − μ_m̂)`, computed with two triangular solves.
    pub fn score_gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        let (m, _) = self.nearest(z)?;
        let diff: Vec<f64> = z.iter().zip(&self.means[m]).map(|(a, b)| a - b).collect();
        let mut g = self.factor_for(m).solve(&diff);
        g.iter_mut().for_each(|v| *v *= 2.0);
        Ok(g)
    }

    /// Writes `means.fvec`, `factor.fvec` (tied) or `factor_<m>.fvec`
    /// (per-cluster) and `metadata.txt` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_features(&FeatureMatrix::from_rows(&self.means)?, dir.join("means.fvec"))?;
        for (k, f) in self.factors.iter().enumerate() {
            let l = f.lower();
            let rows: Vec<&[f64]> = (0..l.dim()).map(|i| l.row(i)).collect();
            write_features(&FeatureMatrix::from_rows(&rows)?, dir.join(self.factor_name(k)))?;
        }
        let counts: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        let meta = format!(
            "detector=mahalanobis\nmode={}\nlambda={}\ndim={}\ncomponents={}\ncounts={}\n",
            self.mode,
            self.shrinkage,
            self.dim,
            self.means.len(),
            counts.join(",")
        );
        let p = dir.join("metadata.txt");
        fs::write(&p, meta).map_err(|e| Error::io(&p, e))
    }

    fn factor_name(&self, k: usize) -> String {
        match self.mode {
            CovarianceMode::Tied => "factor.fvec".to_string(),
            CovarianceMode::PerCluster => format!("factor_{k}.fvec"),
        }
    }

    /// Loads a model written by [`MahalanobisModel::save`]. Values come back at
    /// `f32` storage precision.
    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta = crate::metadata::Metadata::read(dir.join("metadata.txt"))?;
        let bad = |msg: String| Error::Model {
            path: dir.to_path_buf(),
            msg,
        };
        if meta.get("detector") != Some("mahalanobis") {
            return Err(bad("not a mahalanobis model".into()));
        }
        let mode: CovarianceMode = meta.parse("mode").map_err(bad)?;
        let shrinkage: f64 = meta.parse("lambda").map_err(bad)?;
        let dim: usize = meta.parse("dim").map_err(bad)?;
        let components: usize = meta.parse("components").map_err(bad)?;
        let counts = meta
            .require("counts")
            .map_err(bad)?
            .split(',')
            .map(|c| c.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| bad(format!("counts: {e}")))?;
        let means_m = read_features(dir.join("means.fvec"))?;
        if means_m.rows() != components || means_m.cols() != dim || counts.len() != components {
            return Err(bad("metadata disagrees with means.fvec".into()));
        }
        let means: Vec<Vec<f64>> = (0..components).map(|i| means_m.row_f64(i)).collect();
        let n_factors = match mode {
            CovarianceMode::Tied => 1,
            CovarianceMode::PerCluster => components,
        };
        let mut factors = Vec::with_capacity(n_factors);
        for k in 0..n_factors {
            let name = match mode {
                CovarianceMode::Tied => "factor.fvec".to_string(),
                CovarianceMode::PerCluster => format!("factor_{k}.fvec"),
            };
            let fm = read_features(dir.join(&name))?;
            if fm.rows() != dim || fm.cols() != dim {
                return Err(bad(format!("{name} is not {dim}x{dim}")));
            }
            let l = SquareMatrix::from_vec(dim, fm.as_slice().iter().map(|&v| v as f64).collect())?;
            factors.push(Cholesky::from_lower(l)?);
        }
        Self::from_factors(means, factors, mode, shrinkage, Some(counts))
    }
}
