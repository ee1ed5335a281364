//! AUROC and the evaluation protocols built on it.
//!
//! Outliers are the positive class: a detector is good when outliers score
//! higher than inliers.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detector::{Detector, DetectorConfig, Scorer};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::rng::SplitMix64;

/// Mann–Whitney AUROC: the fraction of (inlier, outlier) pairs where the
/// outlier scores higher, ties counted as one half. O(n log n) via midranks.
pub fn auroc(inlier_scores: &[f64], outlier_scores: &[f64]) -> Result<f64> {
    if inlier_scores.is_empty() || outlier_scores.is_empty() {
        return Err(Error::Evaluation("AUROC needs non-empty score arrays".into()));
    }
    if inlier_scores
        .iter()
        .chain(outlier_scores)
        .any(|s| !s.is_finite())
    {
        return Err(Error::Evaluation("non-finite score".into()));
    }
    let n_in = inlier_scores.len() as u128;
    let n_out = outlier_scores.len() as u128;
    let mut all: Vec<(f64, bool)> = inlier_scores
        .iter()
        .map(|&s| (s, false))
        .chain(outlier_scores.iter().map(|&s| (s, true)))
        .collect();
    all.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

    // Twice the outlier rank sum, so midranks stay integral.
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i + 1;
        // -0.0 and 0.0 are distinct under total_cmp but tie as scores.
        while j < all.len() && all[j].0 == all[i].0 {
            j += 1;
        }
        let outliers_in_group = all[i..j].iter().filter(|e| e.1).count() as u128;
        rank_sum2 += outliers_in_group * (i as u128 + j as u128 + 1);
        i = j;
    }
    // 2U = 2R − n_out(n_out + 1); pairs counted twice.
    let u2 = rank_sum2 - n_out * (n_out + 1);
    let denom = 2 * n_in * n_out;
    Ok(ratio_symmetric(u2, denom))
}

/// `num / den`, computed so that `f(x, d) + f(d − x, d) == 1` in floating point.
fn ratio_symmetric(num: u128, den: u128) -> f64 {
    if 2 * num <= den {
        num as f64 / den as f64
    } else {
        1.0 - (den - num) as f64 / den as f64
    }
}

/// Run settings recorded alongside a result.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub components: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub shrinkage: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kernel: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub detector: String,
    pub inlier_scores: Vec<f64>,
    pub outlier_scores: Vec<f64>,
    pub auroc: f64,
    pub metadata: ReportMetadata,
}

impl ScoreReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// One-line summary, AUROC as a percentage with one decimal.
    pub fn summary_line(&self) -> String {
        format!("AUROC {}", percent(self.auroc))
    }
}

/// `0.9834` → `"98.3"`.
pub fn percent(v: f64) -> String {
    format!("{:.1}", 100.0 * v)
}

/// Scores both sets with `detector` and computes the AUROC.
pub fn run_ood_eval(
    detector: &dyn Scorer,
    inlier_test: &FeatureMatrix,
    outlier_test: &FeatureMatrix,
    metadata: ReportMetadata,
) -> Result<ScoreReport> {
    for m in [inlier_test, outlier_test] {
        if m.cols() != detector.dim() {
            return Err(Error::DimensionMismatch {
                expected: detector.dim(),
                got: m.cols(),
            });
        }
    }
    let inlier_scores = detector.score_batch(inlier_test)?;
    let outlier_scores = detector.score_batch(outlier_test)?;
    let auroc = auroc(&inlier_scores, &outlier_scores)?;
    Ok(ScoreReport {
        detector: detector.id(),
        inlier_scores,
        outlier_scores,
        auroc,
        metadata,
    })
}

/// Feature rows paired with class indices.
#[derive(Debug, Clone, Copy)]
pub struct Labeled<'a> {
    pub features: &'a FeatureMatrix,
    pub labels: &'a [usize],
}

impl<'a> Labeled<'a> {
    pub fn new(features: &'a FeatureMatrix, labels: &'a [usize]) -> Result<Self> {
        if labels.len() != features.rows() {
            return Err(Error::LabelCount {
                labels: labels.len(),
                rows: features.rows(),
            });
        }
        Ok(Self { features, labels })
    }

    pub fn rows_of(&self, class: usize) -> Vec<usize> {
        (0..self.labels.len())
            .filter(|&i| self.labels[i] == class)
            .collect()
    }

    fn num_classes(&self) -> usize {
        self.labels.iter().copied().max().map_or(0, |m| m + 1)
    }
}

/// `count` distinct test rows drawn uniformly from classes other than `class`.
pub fn sample_outliers(
    labels: &[usize],
    class: usize,
    count: usize,
    rng: &mut SplitMix64,
) -> Result<Vec<usize>> {
    let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] != class).collect();
    if count > pool.len() {
        return Err(Error::Evaluation(format!(
            "class {class}: need {count} outliers but only {} rows from other classes",
            pool.len()
        )));
    }
    Ok(rng
        .sample_indices(pool.len(), count)
        .into_iter()
        .map(|k| pool[k])
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneVsAllReport {
    pub detector: String,
    /// Mean over runs, per class.
    pub per_class: Vec<f64>,
    /// Sample standard deviation over runs, per class (0 for a single run).
    pub per_class_std: Vec<f64>,
    /// `per_run[r][c]`.
    pub per_run: Vec<Vec<f64>>,
    /// Mean over classes of `per_class`.
    pub mean: f64,
    /// Sample standard deviation over runs of the per-run class mean.
    pub std: f64,
    pub metadata: ReportMetadata,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

impl OneVsAllReport {
    fn from_runs(detector: String, per_run: Vec<Vec<f64>>, metadata: ReportMetadata) -> Self {
        let classes = per_run[0].len();
        let (per_class, per_class_std): (Vec<f64>, Vec<f64>) = (0..classes)
            .map(|c| mean_std(&per_run.iter().map(|r| r[c]).collect::<Vec<_>>()))
            .unzip();
        let run_means: Vec<f64> = per_run
            .iter()
            .map(|r| r.iter().sum::<f64>() / classes as f64)
            .collect();
        let mean = per_class.iter().sum::<f64>() / classes as f64;
        let std = mean_std(&run_means).1;
        Self {
            detector,
            per_class,
            per_class_std,
            per_run,
            mean,
            std,
            metadata,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Per-class table plus the mean, AUROC in percent.
    pub fn to_table(&self) -> String {
        let mut s = String::new();
        writeln!(s, "class\tAUROC\tstd").unwrap();
        for (c, (v, sd)) in self.per_class.iter().zip(&self.per_class_std).enumerate() {
            writeln!(s, "{c}\t{}\t{}", percent(*v), percent(*sd)).unwrap();
        }
        writeln!(s, "mean\t{}\t{}", percent(self.mean), percent(self.std)).unwrap();
        s
    }
}

/// One-vs-all protocol: for each class, fit on that class's training rows and
/// score its test rows against an equal-size sample of the other classes.
/// Run `r` uses seed `seed + r` for both fitting and outlier sampling.
pub fn one_vs_all_eval(
    train: Labeled<'_>,
    test: Labeled<'_>,
    config: &DetectorConfig,
    runs: usize,
    seed: u64,
    metadata: ReportMetadata,
) -> Result<OneVsAllReport> {
    if runs == 0 {
        return Err(Error::InvalidParameter("runs must be >= 1".into()));
    }
    let classes = train.num_classes().max(test.num_classes());
    if classes < 2 {
        return Err(Error::Evaluation(format!(
            "one-vs-all needs at least 2 classes, found {classes}"
        )));
    }
    if train.features.cols() != test.features.cols() {
        return Err(Error::DimensionMismatch {
            expected: train.features.cols(),
            got: test.features.cols(),
        });
    }
    let train_rows: Vec<Vec<usize>> = (0..classes).map(|c| train.rows_of(c)).collect();
    let test_rows: Vec<Vec<usize>> = (0..classes).map(|c| test.rows_of(c)).collect();
    for c in 0..classes {
        if train_rows[c].is_empty() {
            return Err(Error::Evaluation(format!("class {c} absent from train split")));
        }
        if test_rows[c].is_empty() {
            return Err(Error::Evaluation(format!("class {c} absent from test split")));
        }
    }

    let mut per_run = Vec::with_capacity(runs);
    let mut detector_id = String::new();
    for r in 0..runs {
        let run_seed = seed.wrapping_add(r as u64);
        let mut seeder = SplitMix64::new(run_seed);
        let class_seeds: Vec<u64> = (0..classes).map(|_| seeder.next_u64()).collect();
        let cfg = config.clone().with_seed(run_seed);
        let results = (0..classes)
            .into_par_iter()
            .map(|c| {
                let det = Detector::fit(&train.features.select_rows(&train_rows[c])?, &cfg)?;
                let mut rng = SplitMix64::new(class_seeds[c]);
                let out_idx = sample_outliers(test.labels, c, test_rows[c].len(), &mut rng)?;
                let inliers = test.features.select_rows(&test_rows[c])?;
                let outliers = test.features.select_rows(&out_idx)?;
                let report = run_ood_eval(&det, &inliers, &outliers, ReportMetadata::default())?;
                Ok((report.auroc, report.detector))
            })
            .collect::<Result<Vec<_>>>()?;
        detector_id = results[0].1.clone();
        per_run.push(results.into_iter().map(|(a, _)| a).collect());
    }
    Ok(OneVsAllReport::from_runs(detector_id, per_run, metadata))
}

/// Fits one detector per class on the training rows of that class.
pub fn fit_per_class(train: Labeled<'_>, config: &DetectorConfig) -> Result<Vec<Detector>> {
    let classes = train.num_classes();
    (0..classes)
        .into_par_iter()
        .map(|c| {
            let rows = train.rows_of(c);
            if rows.is_empty() {
                return Err(Error::Evaluation(format!("class {c} absent from train split")));
            }
            Detector::fit(&train.features.select_rows(&rows)?, config)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionReport {
    /// `matrix[r][c]`: class-r detector, class r inliers vs class c outliers.
    /// Diagonal entries are `None`.
    pub matrix: Vec<Vec<Option<f64>>>,
    /// Mean of each row's defined entries.
    pub row_means: Vec<f64>,
}

impl ConfusionReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let c = self.matrix.len();
        let mut s = String::from("in\\out");
        for j in 0..c {
            write!(s, "\t{j}").unwrap();
        }
        s.push_str("\tmean\n");
        for (i, row) in self.matrix.iter().enumerate() {
            write!(s, "{i}").unwrap();
            for v in row {
                match v {
                    Some(v) => write!(s, "\t{}", percent(*v)).unwrap(),
                    None => s.push_str("\t-"),
                }
            }
            writeln!(s, "\t{}", percent(self.row_means[i])).unwrap();
        }
        s
    }
}

/// AUROC for one ordered class pair: detector of `inlier_class`, test rows of
/// `inlier_class` as inliers and rows of `outlier_class` as outliers.
pub fn pairwise_auroc(
    test: Labeled<'_>,
    detector: &dyn Scorer,
    inlier_class: usize,
    outlier_class: usize,
) -> Result<f64> {
    let inl = test.rows_of(inlier_class);
    let out = test.rows_of(outlier_class);
    if inl.is_empty() || out.is_empty() {
        return Err(Error::Evaluation(format!(
            "class pair ({inlier_class},{outlier_class}) has no test rows"
        )));
    }
    let a = detector.score_batch(&test.features.select_rows(&inl)?)?;
    let b = detector.score_batch(&test.features.select_rows(&out)?)?;
    auroc(&a, &b)
}

/// C×C matrix of pairwise AUROCs, one fitted detector per class.
pub fn confusion_matrix_eval<S: Scorer + Sync>(
    test: Labeled<'_>,
    detectors: &[Option<S>],
) -> Result<ConfusionReport> {
    let classes = test.num_classes();
    if classes < 2 {
        return Err(Error::Evaluation(format!(
            "confusion matrix needs at least 2 classes, found {classes}"
        )));
    }
    if detectors.len() < classes {
        return Err(Error::Evaluation(format!(
            "missing detector for class {}",
            detectors.len()
        )));
    }
    if let Some(c) = detectors[..classes].iter().position(Option::is_none) {
        return Err(Error::Evaluation(format!("missing detector for class {c}")));
    }
    let matrix = (0..classes)
        .into_par_iter()
        .map(|r| {
            let det = detectors[r].as_ref().unwrap();
            (0..classes)
                .map(|c| {
                    if r == c {
                        Ok(None)
                    } else {
                        pairwise_auroc(test, det, r, c).map(Some)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let row_means = matrix
        .iter()
        .map(|row| {
            let vals: Vec<f64> = row.iter().flatten().copied().collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect();
    Ok(ConfusionReport { matrix, row_means })
}
