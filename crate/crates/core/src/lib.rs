//! Feature-space outlier detection.
//!
//! Features produced by a frozen, pre-trained encoder are stored as FVEC
//! matrices ([`features`]). A detector is fitted on inlier features only:
//!
//! * [`gaussian`]: K-means clusters ([`cluster`]) with cluster means and a tied
//!   or per-cluster covariance; the score is the minimum squared Mahalanobis
//!   distance to a cluster mean.
//! * [`nonparam`]: Gaussian-kernel density and maximum cosine similarity.
//!
//! [`eval`] turns scores into AUROC under the OOD, one-vs-all and pairwise
//! confusion protocols. [`preprocess`] holds the image-side math applied
//! before feature extraction. All scores follow one convention: higher means
//! more outlier-like.

pub mod cluster;
pub mod detector;
pub mod error;
pub mod eval;
pub mod features;
pub mod gaussian;
pub mod linalg;
pub mod manifest;
pub mod metadata;
pub mod nonparam;
pub mod preprocess;
pub mod rng;

pub use cluster::{kmeans_fit, ClusterModel, KMeansConfig};
pub use detector::{Detector, DetectorConfig, DetectorKind, Scorer};
pub use error::{Error, Result};
pub use eval::{auroc, one_vs_all_eval, run_ood_eval, Labeled, OneVsAllReport, ScoreReport};
pub use features::{read_features, write_features, FeatureMatrix};
pub use gaussian::{fit_gaussian_stats, CovarianceMode, MahalanobisModel};
pub use manifest::{load_manifest, DatasetManifest, DatasetRole};
pub use nonparam::{kde_bandwidth_grid, CosineIndex, KdeModel};
