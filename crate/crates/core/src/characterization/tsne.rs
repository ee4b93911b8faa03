//! Exact t-SNE into two dimensions.
//!
//! Input affinities use a Gaussian kernel whose per-point precision is found
//! by bisection so that each conditional distribution hits the requested
//! perplexity (`2^H` with `H` in bits). The joint distribution is the
//! symmetrized conditionals divided by `2n`. The embedding uses a Student-t
//! kernel and is optimized by gradient descent with momentum, per-coordinate
//! gains, and early exaggeration. KL divergence is reported in nats.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::features::{squared_distance, FeatureMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_PERPLEXITY: f64 = 4.0;
pub const DEFAULT_ITERATIONS: usize = 1000;
pub const EARLY_EXAGGERATION: f64 = 12.0;
pub const EXAGGERATION_ITERATIONS: usize = 250;
pub const PERPLEXITY_TOLERANCE: f64 = 1e-4;

const INITIAL_MOMENTUM: f64 = 0.5;
const FINAL_MOMENTUM: f64 = 0.8;
const INIT_STDDEV: f64 = 1e-4;
const MIN_GAIN: f64 = 0.01;
const BISECTION_STEPS: usize = 200;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding2D {
    pub workload_ids: Vec<String>,
    /// `(x, y)` per input row, in input order.
    pub coords: Vec<[f64; 2]>,
    pub perplexity: f64,
    /// Perplexity actually reached by each row's bandwidth search.
    pub achieved_perplexity: Vec<f64>,
    pub final_kl: f64,
    pub seed: u64,
    pub iterations: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tsne {
    pub perplexity: f64,
    pub seed: u64,
    pub iterations: usize,
    /// `None` picks `max(n / (4 * exaggeration), 50)`.
    pub learning_rate: Option<f64>,
}

impl Tsne {
    pub fn new(seed: u64) -> Self {
        Tsne {
            perplexity: DEFAULT_PERPLEXITY,
            seed,
            iterations: DEFAULT_ITERATIONS,
            learning_rate: None,
        }
    }

    pub fn perplexity(mut self, perplexity: f64) -> Self {
        self.perplexity = perplexity;
        self
    }

    pub fn iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn learning_rate(mut self, learning_rate: f64) -> Self {
        self.learning_rate = Some(learning_rate);
        self
    }

    pub fn check(&self, matrix: &FeatureMatrix) -> Result<()> {
        let n = matrix.n_rows();
        if n < 4 {
            return Err(Error::TooFewSamples { needed: 4, got: n });
        }
        if !(self.perplexity > 1.0 && self.perplexity < (n - 1) as f64) {
            return Err(Error::InfeasiblePerplexity {
                perplexity: self.perplexity,
                rows: n,
            });
        }
        if !matrix.is_standardized() {
            return Err(Error::Domain("t-SNE expects a standardized matrix".into()));
        }
        for (r, row) in matrix.rows().iter().enumerate() {
            if let Some(c) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row: r, column: c });
            }
        }
        Ok(())
    }

    pub fn fit(&self, matrix: &FeatureMatrix) -> Result<Embedding2D> {
        self.check(matrix)?;
        let n = matrix.n_rows();
        let order = matrix.canonical_order();
        let rows: Vec<Vec<f64>> = order.iter().map(|&i| matrix.rows()[i].clone()).collect();

        let affinities = joint_probabilities(&rows, self.perplexity);
        let p = &affinities.joint;
        let learning_rate = self
            .learning_rate
            .unwrap_or_else(|| (n as f64 / (4.0 * EARLY_EXAGGERATION)).max(50.0));

        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let normal = Normal::new(0.0, INIT_STDDEV).expect("constant stddev is valid");
        let mut y: Vec<[f64; 2]> = (0..n)
            .map(|_| [normal.sample(&mut rng), normal.sample(&mut rng)])
            .collect();
        let mut step = vec![[0.0f64; 2]; n];
        let mut gains = vec![[1.0f64; 2]; n];
        let mut grad = vec![[0.0f64; 2]; n];
        let mut num = vec![0.0f64; n * n];

        for it in 0..self.iterations {
            let (exaggeration, momentum) = if it < EXAGGERATION_ITERATIONS {
                (EARLY_EXAGGERATION, INITIAL_MOMENTUM)
            } else {
                (1.0, FINAL_MOMENTUM)
            };
            let z = student_t_kernel(&y, &mut num);
            for i in 0..n {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let w = num[i * n + j];
                    let coeff = (exaggeration * p[i * n + j] - w / z) * w;
                    g[0] += coeff * (y[i][0] - y[j][0]);
                    g[1] += coeff * (y[i][1] - y[j][1]);
                }
                grad[i] = [4.0 * g[0], 4.0 * g[1]];
            }
            for i in 0..n {
                for d in 0..2 {
                    let same_direction = (grad[i][d] > 0.0) == (step[i][d] > 0.0);
                    gains[i][d] = if same_direction {
                        (gains[i][d] * 0.8).max(MIN_GAIN)
                    } else {
                        gains[i][d] + 0.2
                    };
                    step[i][d] = momentum * step[i][d] - learning_rate * gains[i][d] * grad[i][d];
                    y[i][d] += step[i][d];
                }
            }
            let mean = [
                y.iter().map(|v| v[0]).sum::<f64>() / n as f64,
                y.iter().map(|v| v[1]).sum::<f64>() / n as f64,
            ];
            for v in &mut y {
                v[0] -= mean[0];
                v[1] -= mean[1];
            }
        }

        let final_kl = kl_divergence(p, &y);
        let mut coords = vec![[0.0; 2]; n];
        let mut achieved = vec![0.0; n];
        for (canonical, &original) in order.iter().enumerate() {
            coords[original] = y[canonical];
            achieved[original] = affinities.achieved_perplexity[canonical];
        }
        if coords.iter().flatten().any(|c| !c.is_finite()) {
            return Err(Error::Domain(
                "t-SNE diverged to non-finite coordinates".into(),
            ));
        }
        Ok(Embedding2D {
            workload_ids: matrix.workload_ids().to_vec(),
            coords,
            perplexity: self.perplexity,
            achieved_perplexity: achieved,
            final_kl,
            seed: self.seed,
            iterations: self.iterations,
            learning_rate,
        })
    }
}

pub fn tsne(matrix: &FeatureMatrix, perplexity: f64, seed: u64) -> Result<Embedding2D> {
    Tsne::new(seed).perplexity(perplexity).fit(matrix)
}

/// Gaussian conditional distribution over neighbors for one precision
/// `beta = 1 / (2 sigma^2)`, with its entropy in bits.
///
/// `sq_dists` holds squared distances to the other points (self excluded).
/// Sums run in ascending-distance order, so the result depends only on the
/// multiset of distances, not on where each neighbor sits.
pub fn conditional_probabilities(sq_dists: &[f64], beta: f64) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..sq_dists.len()).collect();
    order.sort_by(|&a, &b| sq_dists[a].total_cmp(&sq_dists[b]));
    conditional_sorted(sq_dists, &order, beta)
}

fn conditional_sorted(sq_dists: &[f64], order: &[usize], beta: f64) -> (Vec<f64>, f64) {
    let d_min = sq_dists[order[0]];
    let mut weights = vec![0.0; sq_dists.len()];
    let mut sum = 0.0;
    let mut weighted = 0.0;
    for &j in order {
        let shifted = sq_dists[j] - d_min;
        let w = (-beta * shifted).exp();
        weights[j] = w;
        sum += w;
        weighted += w * shifted;
    }
    // H (nats) = ln(sum) + beta * E[shifted distance]
    let entropy_nats = sum.ln() + beta * weighted / sum;
    for w in &mut weights {
        *w /= sum;
    }
    (weights, entropy_nats / std::f64::consts::LN_2)
}

/// Bisects the precision until the conditional's perplexity matches `target`.
/// Returns the distribution and the perplexity reached.
pub fn calibrate_row(sq_dists: &[f64], target: f64) -> (Vec<f64>, f64) {
    let mut order: Vec<usize> = (0..sq_dists.len()).collect();
    order.sort_by(|&a, &b| sq_dists[a].total_cmp(&sq_dists[b]));

    let mut beta = 1.0;
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut best = conditional_sorted(sq_dists, &order, beta);
    let mut best_perp = best.1.exp2();
    for _ in 0..BISECTION_STEPS {
        let (probs, bits) = conditional_sorted(sq_dists, &order, beta);
        let perp = bits.exp2();
        if (perp - target).abs() < (best_perp - target).abs() {
            best = (probs, bits);
            best_perp = perp;
        }
        if (perp - target).abs() < PERPLEXITY_TOLERANCE * 1e-3 {
            break;
        }
        if perp > target {
            lo = beta;
            beta = if hi.is_finite() {
                (lo + hi) / 2.0
            } else {
                beta * 2.0
            };
        } else {
            hi = beta;
            beta = (lo + hi) / 2.0;
        }
    }
    (best.0, best_perp)
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointAffinities {
    pub n: usize,
    /// Row-major `n x n`, zero diagonal.
    pub joint: Vec<f64>,
    /// Row-major `n x n` conditionals `p(j | i)`.
    pub conditional: Vec<f64>,
    pub achieved_perplexity: Vec<f64>,
}

/// Symmetrized input affinities `(p(j|i) + p(i|j)) / 2n`.
pub fn joint_probabilities(rows: &[Vec<f64>], perplexity: f64) -> JointAffinities {
    let n = rows.len();
    let mut conditional = vec![0.0; n * n];
    let mut achieved = Vec::with_capacity(n);
    let mut dists = Vec::with_capacity(n.saturating_sub(1));
    for i in 0..n {
        dists.clear();
        dists.extend(
            (0..n)
                .filter(|&j| j != i)
                .map(|j| squared_distance(&rows[i], &rows[j])),
        );
        let (probs, perp) = calibrate_row(&dists, perplexity);
        achieved.push(perp);
        let others = (0..n).filter(|&j| j != i);
        for (j, p) in others.zip(probs) {
            conditional[i * n + j] = p;
        }
    }
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] =
                    (conditional[i * n + j] + conditional[j * n + i]) / (2.0 * n as f64);
            }
        }
    }
    JointAffinities {
        n,
        joint,
        conditional,
        achieved_perplexity: achieved,
    }
}

/// Fills `num` with `1 / (1 + |yi - yj|^2)` and returns their off-diagonal sum.
fn student_t_kernel(y: &[[f64; 2]], num: &mut [f64]) -> f64 {
    let n = y.len();
    let mut z = 0.0;
    for i in 0..n {
        num[i * n + i] = 0.0;
        for j in (i + 1)..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let w = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = w;
            num[j * n + i] = w;
            z += 2.0 * w;
        }
    }
    z
}

/// `KL(P || Q)` in nats for an embedding `y`.
pub fn kl_divergence(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let z = student_t_kernel(y, &mut num);
    let mut kl = 0.0;
    for i in 0..n {
        for j in 0..n {
            let pij = p[i * n + j];
            if i != j && pij > 0.0 {
                kl += pij * (pij / (num[i * n + j] / z)).ln();
            }
        }
    }
    // Rounding can leave a tiny negative value for a perfect fit.
    kl.max(0.0)
}
