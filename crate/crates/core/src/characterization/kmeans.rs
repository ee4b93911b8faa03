use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{squared_distance, FeatureMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 3;
pub const DEFAULT_MAX_ITER: usize = 300;
pub const DEFAULT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterResult {
    /// Cluster index per input row, in input order.
    pub labels: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    /// Sum of squared distances from each row to its centroid.
    pub inertia: f64,
    pub k: usize,
    pub seed: u64,
    pub iterations: usize,
    /// Inertia after the seeding assignment and after every Lloyd step.
    pub inertia_history: Vec<f64>,
}

/// Lloyd's algorithm with k-means++ seeding.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeans {
    pub k: usize,
    pub seed: u64,
    pub max_iter: usize,
    pub tol: f64,
}

impl KMeans {
    pub fn new(k: usize, seed: u64) -> Self {
        KMeans {
            k,
            seed,
            max_iter: DEFAULT_MAX_ITER,
            tol: DEFAULT_TOL,
        }
    }

    pub fn max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    /// Clusters the rows of a standardized matrix.
    ///
    /// Rows are processed sorted by workload id, so the result does not
    /// depend on input row order beyond the matching permutation of labels.
    pub fn fit(&self, matrix: &FeatureMatrix) -> Result<ClusterResult> {
        let n = matrix.n_rows();
        if n == 0 {
            return Err(Error::Domain("cannot cluster an empty matrix".into()));
        }
        if self.k == 0 || self.k > n {
            return Err(Error::KOutOfRange { k: self.k, rows: n });
        }
        if !matrix.is_standardized() {
            return Err(Error::Domain(
                "k-means expects a standardized matrix".into(),
            ));
        }

        let order = matrix.canonical_order();
        let points: Vec<&[f64]> = order.iter().map(|&i| matrix.rows()[i].as_slice()).collect();

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut centroids = plus_plus_init(&points, self.k, &mut rng);
        let mut labels = vec![usize::MAX; n];
        let mut history = vec![assign(&points, &centroids, &mut labels)];

        let mut iterations = 0;
        while iterations < self.max_iter {
            iterations += 1;
            let updated = update_centroids(&points, &labels, &centroids);
            let shift = centroids
                .iter()
                .zip(&updated)
                .map(|(a, b)| squared_distance(a, b).sqrt())
                .fold(0.0, f64::max);
            centroids = updated;
            history.push(assign(&points, &centroids, &mut labels));
            if shift < self.tol {
                break;
            }
        }

        let mut input_labels = vec![0; n];
        for (canonical, &original) in order.iter().enumerate() {
            input_labels[original] = labels[canonical];
        }
        Ok(ClusterResult {
            labels: input_labels,
            centroids,
            inertia: *history.last().expect("history holds the seeding pass"),
            k: self.k,
            seed: self.seed,
            iterations,
            inertia_history: history,
        })
    }
}

/// Convenience wrapper over [`KMeans`] with default iteration limits.
pub fn kmeans(matrix: &FeatureMatrix, k: usize, seed: u64) -> Result<ClusterResult> {
    KMeans::new(k, seed).fit(matrix)
}

fn plus_plus_init(points: &[&[f64]], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    let mut centroids = vec![points[first].to_vec()];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();

    while centroids.len() < k {
        let total: f64 = nearest.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in nearest.iter().enumerate() {
                if d <= 0.0 {
                    continue;
                }
                acc += d;
                pick = Some(i);
                if acc > target {
                    break;
                }
            }
            pick.expect("positive total implies a positive weight")
        } else {
            // Every point coincides with a centroid; take an unused row.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[next] = true;
        centroids.push(points[next].to_vec());
        let c = centroids.last().expect("just pushed");
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, c));
        }
    }
    centroids
}

/// Assigns each point to its nearest centroid and returns the inertia.
/// A point keeps its current label when that centroid ties for nearest.
fn assign(points: &[&[f64]], centroids: &[Vec<f64>], labels: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (p, label) in points.iter().zip(labels.iter_mut()) {
        let mut best = *label;
        let mut best_d = centroids
            .get(best)
            .map_or(f64::INFINITY, |c| squared_distance(p, c));
        for (j, c) in centroids.iter().enumerate() {
            let d = squared_distance(p, c);
            if d < best_d {
                best = j;
                best_d = d;
            }
        }
        *label = best;
        inertia += best_d;
    }
    inertia
}

/// Means of the assigned points; an empty cluster keeps its old centroid.
fn update_centroids(points: &[&[f64]], labels: &[usize], old: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let dim = old[0].len();
    let mut sums = vec![vec![0.0; dim]; old.len()];
    let mut counts = vec![0usize; old.len()];
    for (p, &l) in points.iter().zip(labels) {
        counts[l] += 1;
        for (s, x) in sums[l].iter_mut().zip(p.iter()) {
            *s += x;
        }
    }
    sums.into_iter()
        .zip(counts)
        .zip(old)
        .map(|((sum, count), prev)| {
            if count == 0 {
                prev.clone()
            } else {
                sum.into_iter().map(|s| s / count as f64).collect()
            }
        })
        .collect()
}

/// Adjusted Rand index between two labelings of the same rows.
///
/// 1.0 for identical partitions (up to relabeling). When both labelings
/// put everything in one cluster the index is undefined and 1.0 is returned.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must cover the same rows");
    let n = a.len();
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![vec![0u64; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        table[x][y] += 1;
    }
    let pairs = |m: u64| (m * m.saturating_sub(1) / 2) as f64;
    let index: f64 = table.iter().flatten().map(|&m| pairs(m)).sum();
    let row_sums: f64 = table.iter().map(|r| pairs(r.iter().sum())).sum();
    let col_sums: f64 = (0..kb)
        .map(|j| pairs(table.iter().map(|r| r[j]).sum()))
        .sum();
    let total = pairs(n as u64);
    let expected = row_sums * col_sums / total;
    let max = (row_sums + col_sums) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}
