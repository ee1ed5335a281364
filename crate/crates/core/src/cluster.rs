//! K-means partitioning of training features.
//!
//! k-means++ seeding from [`SplitMix64`], then Lloyd iterations. Distances
//! and centroids are accumulated in `f64`; the assignment step runs in
//! parallel over rows but every reduction is sequential in row order, so a
//! fixed seed gives bit-identical output.

use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{read_features, write_features, FeatureMatrix};
use crate::rng::SplitMix64;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansConfig {
    pub components: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub rel_tol: f64,
}

impl KMeansConfig {
    pub fn new(components: usize) -> Self {
        Self {
            components,
            seed: 0,
            max_iter: 300,
            rel_tol: 1e-6,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    /// M×D centers, row-major.
    centers: Vec<f64>,
    dim: usize,
    pub assignments: Vec<usize>,
    /// Final quantization objective.
    pub inertia: f64,
    /// Inertia after every assignment step, starting from the seeding.
    pub inertia_trace: Vec<f64>,
    pub iterations: usize,
}

impl ClusterModel {
    /// Builds a model from explicit assignments; centers become the cluster means.
    pub fn from_assignments(features: &FeatureMatrix, assignments: Vec<usize>) -> Result<Self> {
        if assignments.len() != features.rows() {
            return Err(Error::LabelCount {
                labels: assignments.len(),
                rows: features.rows(),
            });
        }
        let m = assignments.iter().copied().max().unwrap_or(0) + 1;
        let (centers, counts) = centroids(features, &assignments, m);
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::EmptyCluster(empty));
        }
        let dim = features.cols();
        let inertia = total_inertia(features, &centers, dim, &assignments);
        Ok(Self {
            centers,
            dim,
            assignments,
            inertia,
            inertia_trace: vec![inertia],
            iterations: 0,
        })
    }

    pub fn components(&self) -> usize {
        self.centers.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn center(&self, m: usize) -> &[f64] {
        &self.centers[m * self.dim..(m + 1) * self.dim]
    }

    pub fn centers(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.centers.chunks_exact(self.dim)
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.components()];
        for &a in &self.assignments {
            c[a] += 1;
        }
        c
    }

    /// Index of the nearest center; ties go to the lowest index.
    pub fn assign(&self, z: &[f64]) -> Result<usize> {
        if z.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: z.len(),
            });
        }
        Ok(nearest(&self.centers, self.dim, |k| z[k]).0)
    }

    /// Writes `centers.fvec` and `assignments.txt` into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        let rows: Vec<&[f64]> = self.centers().collect();
        write_features(&FeatureMatrix::from_rows(&rows)?, dir.join("centers.fvec"))?;
        crate::manifest::write_labels(&self.assignments, dir.join("assignments.txt"))
    }

    /// Inverse of [`ClusterModel::save`]; centers come back at `f32` precision.
    pub fn load(dir: impl AsRef<Path>, features: Option<&FeatureMatrix>) -> Result<Self> {
        let dir = dir.as_ref();
        let centers = read_features(dir.join("centers.fvec"))?;
        let path = dir.join("assignments.txt");
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let assignments = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Model {
                path: path.clone(),
                msg: e.to_string(),
            })?;
        if assignments.iter().any(|&a| a >= centers.rows()) {
            return Err(Error::Model {
                path,
                msg: "assignment index out of range".into(),
            });
        }
        let dim = centers.cols();
        let flat: Vec<f64> = centers.as_slice().iter().map(|&v| v as f64).collect();
        let inertia = match features {
            Some(f) => total_inertia(f, &flat, dim, &assignments),
            None => f64::NAN,
        };
        Ok(Self {
            centers: flat,
            dim,
            assignments,
            inertia,
            inertia_trace: vec![],
            iterations: 0,
        })
    }
}

/// Fits K-means with k-means++ seeding and Lloyd iterations.
pub fn kmeans_fit(features: &FeatureMatrix, config: &KMeansConfig) -> Result<ClusterModel> {
    let n = features.rows();
    let d = features.cols();
    let m = config.components;
    if m == 0 {
        return Err(Error::InvalidParameter("number of clusters must be >= 1".into()));
    }
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "number of clusters {m} exceeds number of rows {n}"
        )));
    }
    if config.max_iter == 0 {
        return Err(Error::InvalidParameter("max_iter must be >= 1".into()));
    }

    let mut rng = SplitMix64::new(config.seed);
    let mut centers = kmeans_pp(features, m, &mut rng);
    let (mut assignments, mut dists) = assign_all(features, &centers, d);
    let mut inertia: f64 = dists.iter().sum();
    let mut trace = vec![inertia];
    let mut iterations = 0;
    // Whether `centers` are the means of the current `assignments`.
    let mut centers_current = false;

    while iterations < config.max_iter {
        iterations += 1;
        let (new_centers, counts) = centroids(features, &assignments, m);
        centers = new_centers;
        repair_empty(features, &mut centers, &counts, &assignments, &dists, d);
        let (new_assignments, new_dists) = assign_all(features, &centers, d);
        let new_inertia: f64 = new_dists.iter().sum();
        let unchanged = new_assignments == assignments;
        let improvement = if inertia > 0.0 {
            (inertia - new_inertia) / inertia
        } else {
            0.0
        };
        assignments = new_assignments;
        dists = new_dists;
        inertia = new_inertia;
        trace.push(inertia);
        if unchanged && counts.iter().all(|&c| c > 0) {
            centers_current = true;
            break;
        }
        if improvement < config.rel_tol {
            break;
        }
    }

    if !centers_current {
        let (new_centers, counts) = centroids(features, &assignments, m);
        if counts.iter().all(|&c| c > 0) {
            centers = new_centers;
            inertia = total_inertia(features, &centers, d, &assignments);
            trace.push(inertia);
        }
    }
    let counts = centroids(features, &assignments, m).1;
    if let Some(k) = counts.iter().position(|&c| c == 0) {
        // Only reachable when the data has fewer than M distinct rows.
        return Err(Error::EmptyCluster(k));
    }

    Ok(ClusterModel {
        centers,
        dim: d,
        assignments,
        inertia,
        inertia_trace: trace,
        iterations,
    })
}

fn sq_dist_to(center: &[f64], row: &[f32]) -> f64 {
    center
        .iter()
        .zip(row)
        .map(|(&c, &x)| {
            let t = x as f64 - c;
            t * t
        })
        .sum()
}

/// Nearest center to the vector given by `coord`, as (index, squared distance).
fn nearest(centers: &[f64], dim: usize, coord: impl Fn(usize) -> f64) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (k, c) in centers.chunks_exact(dim).enumerate() {
        let d: f64 = c
            .iter()
            .enumerate()
            .map(|(j, &cj)| {
                let t = coord(j) - cj;
                t * t
            })
            .sum();
        if d < best.1 {
            best = (k, d);
        }
    }
    best
}

fn assign_all(features: &FeatureMatrix, centers: &[f64], dim: usize) -> (Vec<usize>, Vec<f64>) {
    (0..features.rows())
        .into_par_iter()
        .map(|i| {
            let row = features.row(i);
            nearest(centers, dim, |j| row[j] as f64)
        })
        .unzip()
}

fn centroids(features: &FeatureMatrix, assignments: &[usize], m: usize) -> (Vec<f64>, Vec<usize>) {
    let d = features.cols();
    let mut sums = vec![0.0; m * d];
    let mut counts = vec![0usize; m];
    for (row, &a) in features.iter_rows().zip(assignments) {
        counts[a] += 1;
        for (s, &x) in sums[a * d..(a + 1) * d].iter_mut().zip(row) {
            *s += x as f64;
        }
    }
    for (k, &c) in counts.iter().enumerate() {
        if c > 0 {
            sums[k * d..(k + 1) * d]
                .iter_mut()
                .for_each(|s| *s /= c as f64);
        }
    }
    (sums, counts)
}

fn total_inertia(features: &FeatureMatrix, centers: &[f64], dim: usize, assignments: &[usize]) -> f64 {
    features
        .iter_rows()
        .zip(assignments)
        .map(|(row, &a)| sq_dist_to(&centers[a * dim..(a + 1) * dim], row))
        .sum()
}

/// Moves every empty cluster's center onto the row that is currently farthest
/// from its own center. Rows already used as a reseed point are skipped.
fn repair_empty(
    features: &FeatureMatrix,
    centers: &mut [f64],
    counts: &[usize],
    assignments: &[usize],
    dists: &[f64],
    dim: usize,
) {
    if counts.iter().all(|&c| c > 0) {
        return;
    }
    let mut order: Vec<usize> = (0..features.rows()).collect();
    // Farthest first; stable on index for equal distances.
    order.sort_by(|&a, &b| dists[b].total_cmp(&dists[a]).then(a.cmp(&b)));
    let mut donors = order.into_iter().filter(|&i| counts[assignments[i]] > 1);
    for (k, _) in counts.iter().enumerate().filter(|(_, &c)| c == 0) {
        if let Some(i) = donors.next() {
            for (c, &x) in centers[k * dim..(k + 1) * dim].iter_mut().zip(features.row(i)) {
                *c = x as f64;
            }
        }
    }
}

fn kmeans_pp(features: &FeatureMatrix, m: usize, rng: &mut SplitMix64) -> Vec<f64> {
    let n = features.rows();
    let d = features.cols();
    let mut centers = Vec::with_capacity(m * d);
    let first = rng.below(n);
    centers.extend(features.row(first).iter().map(|&v| v as f64));
    let mut closest: Vec<f64> = features
        .iter_rows()
        .map(|r| sq_dist_to(&centers[..d], r))
        .collect();
    for _ in 1..m {
        let total: f64 = closest.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.next_f64() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &w) in closest.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    chosen = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the final sum.
            chosen.unwrap_or_else(|| closest.iter().rposition(|&w| w > 0.0).unwrap())
        } else {
            // All remaining rows coincide with existing centers.
            rng.below(n)
        };
        let start = centers.len();
        centers.extend(features.row(pick).iter().map(|&v| v as f64));
        let new_center = centers[start..].to_vec();
        closest
            .par_iter_mut()
            .zip(features.as_slice().par_chunks_exact(d))
            .for_each(|(c, r)| {
                let dd = sq_dist_to(&new_center, r);
                if dd < *c {
                    *c = dd;
                }
            });
    }
    centers
}
