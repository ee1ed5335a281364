//! Dataset manifests: line-oriented `key=value` text plus an optional labels
//! sidecar holding one class index per line.
//!
//! ```text
//! # comments and blank lines are ignored
//! name=cifar10-train
//! feature_file=train.fvec
//! labels=train.labels
//! role=labeled-multiclass
//! ```
//!
//! Relative paths are resolved against the manifest's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::features::{read_features, FeatureMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetRole {
    Inlier,
    Outlier,
    LabeledMulticlass,
}

impl FromStr for DatasetRole {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "inlier" => Ok(Self::Inlier),
            "outlier" => Ok(Self::Outlier),
            "labeled-multiclass" => Ok(Self::LabeledMulticlass),
            other => Err(format!("unknown role {other:?}")),
        }
    }
}

impl fmt::Display for DatasetRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Inlier => "inlier",
            Self::Outlier => "outlier",
            Self::LabeledMulticlass => "labeled-multiclass",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub name: String,
    pub feature_file: PathBuf,
    /// Per-row class indices, already read from the sidecar.
    pub labels: Option<Vec<usize>>,
    pub role: DatasetRole,
}

/// Features together with their (optional) class labels, row counts checked.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub features: FeatureMatrix,
    pub labels: Option<Vec<usize>>,
    pub role: DatasetRole,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        features: FeatureMatrix,
        labels: Option<Vec<usize>>,
        role: DatasetRole,
    ) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != features.rows() {
                return Err(Error::LabelCount {
                    labels: l.len(),
                    rows: features.rows(),
                });
            }
        }
        Ok(Self {
            name: name.into(),
            features,
            labels,
            role,
        })
    }

    /// Number of classes, when labeled.
    pub fn num_classes(&self) -> Option<usize> {
        self.labels
            .as_ref()
            .map(|l| l.iter().copied().max().map_or(0, |m| m + 1))
    }
}

impl DatasetManifest {
    /// Reads the feature file and cross-checks the label count.
    pub fn load(&self) -> Result<Dataset> {
        let features = read_features(&self.feature_file)?;
        Dataset::new(self.name.clone(), features, self.labels.clone(), self.role)
    }
}

/// Parses and validates a manifest file.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    parse_manifest(&text, base).map_err(|msg| Error::Manifest {
        path: path.to_path_buf(),
        msg,
    })
    .and_then(|(m, labels_path)| match labels_path {
        Some(lp) => Ok(DatasetManifest {
            labels: Some(read_labels(&lp)?),
            ..m
        }),
        None => Ok(m),
    })
}

fn parse_manifest(
    text: &str,
    base: &Path,
) -> std::result::Result<(DatasetManifest, Option<PathBuf>), String> {
    let mut name = None;
    let mut feature_file = None;
    let mut labels = None;
    let mut role = None;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("line {}: expected key=value", lineno + 1))?;
        let (key, value) = (key.trim(), value.trim());
        let slot = match key {
            "name" => &mut name,
            "feature_file" => &mut feature_file,
            "labels" => &mut labels,
            "role" => &mut role,
            other => return Err(format!("line {}: unknown key {other:?}", lineno + 1)),
        };
        if slot.replace(value.to_string()).is_some() {
            return Err(format!("line {}: duplicate key {key:?}", lineno + 1));
        }
    }
    let name = name.ok_or("missing field \"name\"")?;
    let feature_file = base.join(feature_file.ok_or("missing field \"feature_file\"")?);
    let role: DatasetRole = role.ok_or("missing field \"role\"")?.parse()?;
    let labels_path = labels.map(|l| base.join(l));
    if role == DatasetRole::LabeledMulticlass && labels_path.is_none() {
        return Err("role labeled-multiclass requires a labels file".into());
    }
    Ok((
        DatasetManifest {
            name,
            feature_file,
            labels: None,
            role,
        },
        labels_path,
    ))
}

/// Reads a labels sidecar (one non-negative integer per line) and checks that
/// the class indices are contiguous from 0.
pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let labels = parse_labels(&text).map_err(|msg| Error::Manifest {
        path: path.to_path_buf(),
        msg,
    })?;
    check_contiguous(&labels)?;
    Ok(labels)
}

fn parse_labels(text: &str) -> std::result::Result<Vec<usize>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|e| format!("line {}: bad label {:?}: {e}", i + 1, l.trim()))
        })
        .collect()
}

pub fn check_contiguous(labels: &[usize]) -> Result<()> {
    let Some(&max) = labels.iter().max() else {
        return Ok(());
    };
    let mut seen = vec![false; max + 1];
    for &l in labels {
        seen[l] = true;
    }
    match seen.iter().position(|s| !s) {
        Some(missing) => Err(Error::NonContiguousLabels(missing)),
        None => Ok(()),
    }
}

/// Writes labels one per line.
pub fn write_labels(labels: &[usize], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = String::with_capacity(labels.len() * 3);
    for l in labels {
        text.push_str(&l.to_string());
        text.push('\n');
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
