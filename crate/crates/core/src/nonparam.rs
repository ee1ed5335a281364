//! Non-parametric baselines: Gaussian-kernel density estimate and
//! maximum cosine similarity to the training set.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::SplitMix64;

/// Fraction of inlier rows held out when selecting a KDE bandwidth.
pub const HOLDOUT_FRACTION: f64 = 0.1;

/// Gaussian KDE over the training rows with isotropic bandwidth `h`.
#[derive(Debug, Clone)]
pub struct KdeModel {
    train: FeatureMatrix,
    bandwidth: f64,
}

impl KdeModel {
    pub fn new(train: FeatureMatrix, bandwidth: f64) -> Result<Self> {
        if !bandwidth.is_finite() || bandwidth <= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "bandwidth must be > 0, got {bandwidth}"
            )));
        }
        Ok(Self { train, bandwidth })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn train(&self) -> &FeatureMatrix {
        &self.train
    }

    pub fn dim(&self) -> usize {
        self.train.cols()
    }

    /// Log-density of `z`:
    /// `log[(1/N) Σ_i exp(−‖z − z_i‖² / 2h²)] − (D/2)·log(2πh²)`.
    pub fn log_density(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: z.len(),
            });
        }
        let two_h2 = 2.0 * self.bandwidth * self.bandwidth;
        let exponents: Vec<f64> = self
            .train
            .iter_rows()
            .map(|row| {
                let d2: f64 = row
                    .iter()
                    .zip(z)
                    .map(|(&x, &q)| {
                        let t = q - x as f64;
                        t * t
                    })
                    .sum();
                -d2 / two_h2
            })
            .collect();
        let n = self.train.rows() as f64;
        let d = self.dim() as f64;
        let norm = 0.5 * d * (std::f64::consts::TAU * self.bandwidth * self.bandwidth).ln();
        Ok(log_sum_exp(&exponents) - n.ln() - norm)
    }

    /// Negative log-density; higher means more outlier-like.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        self.log_density(z).map(|v| -v)
    }

    pub fn score_batch(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        (0..features.rows())
            .into_par_iter()
            .map(|i| self.score(&features.row_f64(i)))
            .collect()
    }
}

/// `log Σ exp(x_i)`, shifted by the maximum.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Picks the bandwidth with the highest mean held-out log-density.
///
/// A seeded shuffle splits off `ceil(0.1·N)` rows (at least one, leaving at
/// least one for fitting); each candidate KDE is built on the remainder and
/// evaluated on the held-out rows. Ties keep the earlier grid entry.
pub fn kde_bandwidth_grid(features: &FeatureMatrix, grid: &[f64], seed: u64) -> Result<f64> {
    if grid.is_empty() {
        return Err(Error::InvalidParameter("bandwidth grid is empty".into()));
    }
    if let Some(bad) = grid.iter().find(|h| !h.is_finite() || **h <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bandwidth grid contains non-positive value {bad}"
        )));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    let (fit, held) = holdout_split(features, seed)?;
    let queries: Vec<Vec<f64>> = (0..held.rows()).map(|i| held.row_f64(i)).collect();
    let mut best: Option<(f64, f64)> = None;
    for &h in grid {
        let kde = KdeModel::new(fit.clone(), h)?;
        let mut total = 0.0;
        for q in &queries {
            total += kde.log_density(q)?;
        }
        let mean = total / queries.len() as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((h, mean));
        }
    }
    Ok(best.unwrap().0)
}

/// Seeded (fit, held-out) split used by [`kde_bandwidth_grid`].
pub fn holdout_split(features: &FeatureMatrix, seed: u64) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let n = features.rows();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "bandwidth selection needs at least 2 rows".into(),
        ));
    }
    let held = ((n as f64 * HOLDOUT_FRACTION).ceil() as usize).clamp(1, n - 1);
    let mut order: Vec<usize> = (0..n).collect();
    SplitMix64::new(seed).shuffle(&mut order);
    let (h, f) = order.split_at(held);
    Ok((features.select_rows(f)?, features.select_rows(h)?))
}

/// Default grid: the root mean per-dimension variance of `features` scaled by
/// `{0.1, 0.2, 0.5, 1, 2, 5}`.
pub fn default_bandwidth_grid(features: &FeatureMatrix) -> Vec<f64> {
    let n = features.rows() as f64;
    let d = features.cols();
    let mut mean = vec![0.0; d];
    for row in features.iter_rows() {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += x as f64 / n;
        }
    }
    let mut var = 0.0;
    for row in features.iter_rows() {
        for (m, &x) in mean.iter().zip(row) {
            var += (x as f64 - m).powi(2);
        }
    }
    let sigma = (var / (n * d as f64)).sqrt();
    let sigma = if sigma > 0.0 { sigma } else { 1.0 };
    [0.1, 0.2, 0.5, 1.0, 2.0, 5.0].iter().map(|s| s * sigma).collect()
}

/// Training rows normalized to unit length for cosine scoring.
#[derive(Debug, Clone)]
pub struct CosineIndex {
    /// Unit rows, row-major, only the valid ones.
    unit: Vec<f64>,
    dim: usize,
    /// Original row indices that had zero norm and were skipped.
    pub invalid_rows: Vec<usize>,
}

impl CosineIndex {
    pub fn new(train: &FeatureMatrix) -> Result<Self> {
        let dim = train.cols();
        let mut unit = Vec::with_capacity(train.rows() * dim);
        let mut invalid_rows = Vec::new();
        for (i, row) in train.iter_rows().enumerate() {
            let norm = row.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
            if norm == 0.0 {
                invalid_rows.push(i);
                continue;
            }
            unit.extend(row.iter().map(|&x| x as f64 / norm));
        }
        if unit.is_empty() {
            return Err(Error::ZeroNorm);
        }
        Ok(Self {
            unit,
            dim,
            invalid_rows,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.unit.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.unit.is_empty()
    }

    pub fn unit_rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.unit.chunks_exact(self.dim)
    }

    /// Largest cosine similarity between `z` and the training rows.
    pub fn max_similarity(&self, z: &[f64]) -> Result<f64> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::ZeroNorm);
        }
        let best = self
            .unit_rows()
            .map(|u| u.iter().zip(z).map(|(a, b)| a * b).sum::<f64>())
            .fold(f64::NEG_INFINITY, f64::max);
        Ok((best / norm).clamp(-1.0, 1.0))
    }

    /// `1 − max cos`, in `[0, 2]`; higher means more outlier-like.
    pub fn score(&self, z: &[f64]) -> Result<f64> {
        self.max_similarity(z).map(|s| 1.0 - s)
    }

    pub fn score_batch(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        (0..features.rows())
            .into_par_iter()
            .map(|i| self.score(&features.row_f64(i)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kde_single_point_peak() {
        let f = FeatureMatrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        let h: f64 = 0.7;
        let kde = KdeModel::new(f, h).unwrap();
        let s = kde.score(&[1.0, 2.0, 3.0]).unwrap();
        let expected = 1.5 * (2.0 * std::f64::consts::PI * h * h).ln();
        assert!((s - expected).abs() < 1e-12);
    }

    #[test]
    fn kde_far_point_scores_higher() {
        let f = FeatureMatrix::from_rows(&[[0.0], [2.0]]).unwrap();
        let kde = KdeModel::new(f, 1.0).unwrap();
        assert!(kde.score(&[50.0]).unwrap() > kde.score(&[1.0]).unwrap());
        // Deep tail stays finite thanks to the log-sum-exp shift.
        assert!(kde.score(&[1e4]).unwrap().is_finite());
    }

    #[test]
    fn kde_rejects_bad_bandwidth() {
        let f = FeatureMatrix::from_rows(&[[0.0]]).unwrap();
        assert!(KdeModel::new(f.clone(), 0.0).is_err());
        assert!(KdeModel::new(f, -1.0).is_err());
    }

    #[test]
    fn grid_validation() {
        let f = FeatureMatrix::from_rows(&[[0.0], [1.0], [2.0]]).unwrap();
        assert_eq!(kde_bandwidth_grid(&f, &[0.3], 1).unwrap(), 0.3);
        assert!(kde_bandwidth_grid(&f, &[], 1).is_err());
        assert!(kde_bandwidth_grid(&f, &[0.5, 0.0], 1).is_err());
    }

    #[test]
    fn cosine_basics() {
        let f = FeatureMatrix::from_rows(&[[1.0, 0.0, 0.0], [0.0, 2.0, 0.0], [0.0, 0.0, 0.0]]).unwrap();
        let idx = CosineIndex::new(&f).unwrap();
        assert_eq!(idx.invalid_rows, vec![2]);
        assert_eq!(idx.len(), 2);
        assert!(idx.score(&[0.0, 5.0, 0.0]).unwrap().abs() < 1e-15);
        assert!((idx.score(&[0.0, 0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!(matches!(idx.score(&[0.0; 3]), Err(Error::ZeroNorm)));
        for u in idx.unit_rows() {
            let n: f64 = u.iter().map(|v| v * v).sum();
            assert!((n - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn all_zero_training_rejected() {
        let f = FeatureMatrix::from_rows(&[[0.0, 0.0]]).unwrap();
        assert!(CosineIndex::new(&f).is_err());
    }

    #[test]
    fn log_sum_exp_stable() {
        let v = log_sum_exp(&[-1000.0, -1000.0]);
        assert!((v - (-1000.0 + 2f64.ln())).abs() < 1e-12);
    }
}
