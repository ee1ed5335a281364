//! Run settings: built-in defaults, then a preset, then an optional TOML
//! file, then command-line flags. Later layers win.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use outlier_core::eval::ReportMetadata;
use outlier_core::gaussian::DEFAULT_SHRINKAGE;
use outlier_core::preprocess::ResampleKernel;
use outlier_core::{CovarianceMode, DetectorConfig, DetectorKind};
use serde::Deserialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Preset {
    #[value(name = "cifar10-ood")]
    Cifar10Ood,
    Oneclass,
    HighresOod,
}

impl Preset {
    pub fn components(self) -> usize {
        match self {
            Preset::Cifar10Ood => 8,
            Preset::Oneclass => 4,
            Preset::HighresOod => 10,
        }
    }
}

/// Flags shared by every command. All optional so the merge can tell
/// "not given" from "given".
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// TOML file with any of the settings below; flags override it
    #[arg(long, global = true)]
    pub config: Option<std::path::PathBuf>,
    #[arg(long, global = true)]
    pub preset: Option<Preset>,
    /// mahalanobis | kde | cosine
    #[arg(long, global = true)]
    pub detector: Option<DetectorKind>,
    /// Number of K-means components (M)
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub components: Option<u64>,
    /// tied | percluster
    #[arg(long = "cov", global = true)]
    pub mode: Option<CovarianceMode>,
    /// Covariance shrinkage, relative to the mean variance
    #[arg(long, global = true, value_parser = non_negative)]
    pub shrinkage: Option<f64>,
    /// Fixed KDE bandwidth (default: grid search)
    #[arg(long, global = true, value_parser = positive)]
    pub bandwidth: Option<f64>,
    /// nearest | bilinear | cubic | lanczos
    #[arg(long, global = true)]
    pub kernel: Option<ResampleKernel>,
    /// Input perturbation size, 0 disables
    #[arg(long, global = true, value_parser = non_negative)]
    pub epsilon: Option<f64>,
    /// Seed for K-means and sampling
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Repetitions of the one-vs-all protocol
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub runs: Option<u64>,
}

fn non_negative(s: &str) -> std::result::Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v >= 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a finite value >= 0, got {s}"))
    }
}

fn positive(s: &str) -> std::result::Result<f64, String> {
    let v = non_negative(s)?;
    if v > 0.0 {
        Ok(v)
    } else {
        Err(format!("expected a value > 0, got {s}"))
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    preset: Option<Preset>,
    detector: Option<String>,
    components: Option<usize>,
    cov: Option<String>,
    shrinkage: Option<f64>,
    bandwidth: Option<f64>,
    kernel: Option<String>,
    epsilon: Option<f64>,
    seed: Option<u64>,
    runs: Option<usize>,
}

/// Fully resolved settings.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub detector: DetectorKind,
    pub components: usize,
    pub mode: CovarianceMode,
    pub shrinkage: f64,
    pub bandwidth: Option<f64>,
    pub kernel: ResampleKernel,
    pub epsilon: f64,
    pub seed: u64,
    pub runs: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            detector: DetectorKind::Mahalanobis,
            components: 1,
            mode: CovarianceMode::Tied,
            shrinkage: DEFAULT_SHRINKAGE,
            bandwidth: None,
            kernel: ResampleKernel::Bicubic,
            epsilon: 0.0,
            seed: 0,
            runs: 1,
        }
    }
}

/// A bad setting in the config file. Reported as a usage error.
#[derive(Debug)]
pub struct InvalidConfig(pub String);

impl std::fmt::Display for InvalidConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InvalidConfig {}

fn parse_field<T: std::str::FromStr<Err = String>>(v: Option<String>, key: &str) -> Result<Option<T>> {
    v.map(|s| s.parse().map_err(|e| InvalidConfig(format!("config key {key}: {e}")).into()))
        .transpose()
}

fn read_file(path: &Path) -> Result<FileConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    toml::from_str(&text).map_err(|e| InvalidConfig(format!("{}: {e}", path.display())).into())
}

impl RunConfig {
    pub fn resolve(args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(p) => read_file(p)?,
            None => FileConfig::default(),
        };
        let mut cfg = Self::default();
        if let Some(p) = args.preset.or(file.preset) {
            cfg.components = p.components();
        }

        if let Some(v) = parse_field(file.detector, "detector")? {
            cfg.detector = v;
        }
        if let Some(v) = file.components {
            cfg.components = v;
        }
        if let Some(v) = parse_field(file.cov, "cov")? {
            cfg.mode = v;
        }
        if let Some(v) = file.shrinkage {
            cfg.shrinkage = v;
        }
        cfg.bandwidth = file.bandwidth;
        if let Some(v) = parse_field(file.kernel, "kernel")? {
            cfg.kernel = v;
        }
        if let Some(v) = file.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = file.seed {
            cfg.seed = v;
        }
        if let Some(v) = file.runs {
            cfg.runs = v;
        }

        if let Some(v) = args.detector {
            cfg.detector = v;
        }
        if let Some(v) = args.components {
            cfg.components = v as usize;
        }
        if let Some(v) = args.mode {
            cfg.mode = v;
        }
        if let Some(v) = args.shrinkage {
            cfg.shrinkage = v;
        }
        if args.bandwidth.is_some() {
            cfg.bandwidth = args.bandwidth;
        }
        if let Some(v) = args.kernel {
            cfg.kernel = v;
        }
        if let Some(v) = args.epsilon {
            cfg.epsilon = v;
        }
        if let Some(v) = args.seed {
            cfg.seed = v;
        }
        if let Some(v) = args.runs {
            cfg.runs = v as usize;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let bad = |msg: String| -> Result<()> { Err(InvalidConfig(msg).into()) };
        if self.components == 0 {
            return bad("components must be >= 1".into());
        }
        if !(self.shrinkage.is_finite() && self.shrinkage >= 0.0) {
            return bad(format!("shrinkage must be >= 0, got {}", self.shrinkage));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return bad(format!("epsilon must be >= 0, got {}", self.epsilon));
        }
        if self.runs == 0 {
            return bad("runs must be >= 1".into());
        }
        if let Some(h) = self.bandwidth {
            if !(h.is_finite() && h > 0.0) {
                return bad(format!("bandwidth must be > 0, got {h}"));
            }
        }
        Ok(())
    }

    pub fn detector_config(&self) -> DetectorConfig {
        DetectorConfig {
            kind: self.detector,
            components: self.components,
            mode: self.mode,
            shrinkage: self.shrinkage,
            bandwidth: self.bandwidth,
            seed: self.seed,
            ..DetectorConfig::default()
        }
    }

    pub fn metadata(&self) -> ReportMetadata {
        let md = self.detector == DetectorKind::Mahalanobis;
        ReportMetadata {
            components: md.then_some(self.components),
            mode: md.then(|| self.mode.to_string()),
            shrinkage: md.then_some(self.shrinkage),
            kernel: Some(self.kernel.to_string()),
            epsilon: Some(self.epsilon),
            seed: Some(self.seed),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args() -> RunArgs {
        RunArgs::default()
    }

    #[test]
    fn presets_set_components() {
        for (p, m) in [(Preset::Cifar10Ood, 8), (Preset::Oneclass, 4), (Preset::HighresOod, 10)] {
            let cfg = RunConfig::resolve(&RunArgs { preset: Some(p), ..args() }).unwrap();
            assert_eq!(cfg.components, m);
        }
    }

    #[test]
    fn flags_override_file_which_overrides_preset() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.toml");
        fs::write(&path, "preset = \"highres-ood\"\ncomponents = 3\ncov = \"percluster\"\nseed = 9\n").unwrap();
        let from_file = RunConfig::resolve(&RunArgs { config: Some(path.clone()), ..args() }).unwrap();
        assert_eq!(from_file.components, 3);
        assert_eq!(from_file.mode, CovarianceMode::PerCluster);
        assert_eq!(from_file.seed, 9);
        let flagged = RunConfig::resolve(&RunArgs {
            config: Some(path),
            components: Some(5),
            seed: Some(1),
            ..args()
        })
        .unwrap();
        assert_eq!((flagged.components, flagged.seed), (5, 1));
        assert_eq!(flagged.mode, CovarianceMode::PerCluster);
    }

    #[test]
    fn invalid_file_values_are_usage_errors() {
        let dir = tempfile::tempdir().unwrap();
        for body in ["components = 0", "kernel = \"box\"", "typo = 1", "epsilon = -1.0"] {
            let path = dir.path().join("bad.toml");
            fs::write(&path, body).unwrap();
            let err = RunConfig::resolve(&RunArgs { config: Some(path), ..args() }).unwrap_err();
            assert!(err.downcast_ref::<InvalidConfig>().is_some(), "{body}: {err}");
        }
    }
}
