//! Common front for the three detectors, with fitting from a config and
//! model-directory persistence.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans_fit, ClusterModel, KMeansConfig};
use crate::error::{Error, Result};
use crate::features::{read_features, write_features, FeatureMatrix};
use crate::gaussian::{fit_gaussian_stats, CovarianceMode, MahalanobisModel, DEFAULT_SHRINKAGE};
use crate::metadata::Metadata;
use crate::nonparam::{default_bandwidth_grid, kde_bandwidth_grid, CosineIndex, KdeModel};

/// Anything that maps feature rows to outlier scores (higher = more outlying).
pub trait Scorer {
    fn score_batch(&self, features: &FeatureMatrix) -> Result<Vec<f64>>;

    fn dim(&self) -> usize;

    fn id(&self) -> String;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DetectorKind {
    Mahalanobis,
    Kde,
    Cosine,
}

impl FromStr for DetectorKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "mahalanobis" | "md" => Ok(Self::Mahalanobis),
            "kde" => Ok(Self::Kde),
            "cosine" => Ok(Self::Cosine),
            other => Err(format!("unknown detector {other:?}")),
        }
    }
}

impl fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Mahalanobis => "mahalanobis",
            Self::Kde => "kde",
            Self::Cosine => "cosine",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub kind: DetectorKind,
    pub components: usize,
    pub mode: CovarianceMode,
    pub shrinkage: f64,
    /// Fixed KDE bandwidth; when `None` one is chosen from `bandwidth_grid`.
    pub bandwidth: Option<f64>,
    /// KDE candidate bandwidths; `None` uses [`default_bandwidth_grid`].
    pub bandwidth_grid: Option<Vec<f64>>,
    pub seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            kind: DetectorKind::Mahalanobis,
            components: 1,
            mode: CovarianceMode::Tied,
            shrinkage: DEFAULT_SHRINKAGE,
            bandwidth: None,
            bandwidth_grid: None,
            seed: 0,
            max_iter: 300,
            rel_tol: 1e-6,
        }
    }
}

impl DetectorConfig {
    pub fn mahalanobis(components: usize, mode: CovarianceMode) -> Self {
        Self {
            components,
            mode,
            ..Self::default()
        }
    }

    pub fn kde() -> Self {
        Self {
            kind: DetectorKind::Kde,
            ..Self::default()
        }
    }

    pub fn cosine() -> Self {
        Self {
            kind: DetectorKind::Cosine,
            ..Self::default()
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn kmeans(&self) -> KMeansConfig {
        KMeansConfig {
            components: self.components,
            seed: self.seed,
            max_iter: self.max_iter,
            rel_tol: self.rel_tol,
        }
    }
}

/// A fitted detector.
#[derive(Debug, Clone)]
pub enum Detector {
    Mahalanobis {
        model: MahalanobisModel,
        clusters: Option<ClusterModel>,
    },
    Kde(KdeModel),
    Cosine(CosineIndex, FeatureMatrix),
}

impl Detector {
    pub fn fit(train: &FeatureMatrix, config: &DetectorConfig) -> Result<Self> {
        match config.kind {
            DetectorKind::Mahalanobis => {
                let clusters = kmeans_fit(train, &config.kmeans())?;
                let model = fit_gaussian_stats(train, &clusters, config.mode, config.shrinkage)?;
                Ok(Self::Mahalanobis {
                    model,
                    clusters: Some(clusters),
                })
            }
            DetectorKind::Kde => {
                let h = match config.bandwidth {
                    Some(h) => h,
                    None => {
                        let grid = config
                            .bandwidth_grid
                            .clone()
                            .unwrap_or_else(|| default_bandwidth_grid(train));
                        kde_bandwidth_grid(train, &grid, config.seed)?
                    }
                };
                Ok(Self::Kde(KdeModel::new(train.clone(), h)?))
            }
            DetectorKind::Cosine => Ok(Self::Cosine(CosineIndex::new(train)?, train.clone())),
        }
    }

    pub fn kind(&self) -> DetectorKind {
        match self {
            Self::Mahalanobis { .. } => DetectorKind::Mahalanobis,
            Self::Kde(_) => DetectorKind::Kde,
            Self::Cosine(..) => DetectorKind::Cosine,
        }
    }

    pub fn score(&self, z: &[f64]) -> Result<f64> {
        match self {
            Self::Mahalanobis { model, .. } => model.score(z),
            Self::Kde(k) => k.score(z),
            Self::Cosine(c, _) => c.score(z),
        }
    }

    /// Writes the model directory. Output bytes depend only on the fitted state.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta_path = dir.join("metadata.txt");
        match self {
            Self::Mahalanobis { model, clusters } => {
                model.save(dir)?;
                if let Some(c) = clusters {
                    c.save(dir)?;
                    let mut f = fs::OpenOptions::new()
                        .append(true)
                        .open(&meta_path)
                        .map_err(|e| Error::io(&meta_path, e))?;
                    writeln!(f, "inertia={}\niterations={}", c.inertia, c.iterations)
                        .map_err(|e| Error::io(&meta_path, e))?;
                }
                Ok(())
            }
            Self::Kde(k) => {
                write_features(k.train(), dir.join("features.fvec"))?;
                let meta = format!(
                    "detector=kde\nbandwidth={}\ndim={}\nrows={}\n",
                    k.bandwidth(),
                    k.dim(),
                    k.train().rows()
                );
                fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
            }
            Self::Cosine(c, train) => {
                write_features(train, dir.join("features.fvec"))?;
                let meta = format!(
                    "detector=cosine\ndim={}\nrows={}\ninvalid_rows={}\n",
                    c.dim(),
                    train.rows(),
                    c.invalid_rows.len()
                );
                fs::write(&meta_path, meta).map_err(|e| Error::io(&meta_path, e))
            }
        }
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let meta = Metadata::read(dir.join("metadata.txt"))?;
        let bad = |msg: String| Error::Model {
            path: dir.to_path_buf(),
            msg,
        };
        let kind: DetectorKind = meta.parse("detector").map_err(bad)?;
        match kind {
            DetectorKind::Mahalanobis => {
                let model = MahalanobisModel::load(dir)?;
                let clusters = if dir.join("centers.fvec").exists() {
                    Some(ClusterModel::load(dir, None)?)
                } else {
                    None
                };
                Ok(Self::Mahalanobis { model, clusters })
            }
            DetectorKind::Kde => {
                let h: f64 = meta.parse("bandwidth").map_err(bad)?;
                let train = read_features(dir.join("features.fvec"))?;
                Ok(Self::Kde(KdeModel::new(train, h)?))
            }
            DetectorKind::Cosine => {
                let train = read_features(dir.join("features.fvec"))?;
                Ok(Self::Cosine(CosineIndex::new(&train)?, train))
            }
        }
    }
}

impl Scorer for Detector {
    fn score_batch(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        if features.cols() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: features.cols(),
            });
        }
        match self {
            Self::Mahalanobis { model, .. } => model.score_batch(features),
            Self::Kde(k) => k.score_batch(features),
            Self::Cosine(c, _) => c.score_batch(features),
        }
    }

    fn dim(&self) -> usize {
        match self {
            Self::Mahalanobis { model, .. } => model.dim(),
            Self::Kde(k) => k.dim(),
            Self::Cosine(c, _) => c.dim(),
        }
    }

    fn id(&self) -> String {
        match self {
            Self::Mahalanobis { model, .. } => format!(
                "mahalanobis(M={},{},lambda={})",
                model.components(),
                model.mode(),
                model.shrinkage()
            ),
            Self::Kde(k) => format!("kde(h={})", k.bandwidth()),
            Self::Cosine(..) => "cosine".to_string(),
        }
    }
}

impl Scorer for MahalanobisModel {
    fn score_batch(&self, features: &FeatureMatrix) -> Result<Vec<f64>> {
        MahalanobisModel::score_batch(self, features)
    }

    fn dim(&self) -> usize {
        MahalanobisModel::dim(self)
    }

    fn id(&self) -> String {
        format!("mahalanobis(M={},{})", self.components(), self.mode())
    }
}
