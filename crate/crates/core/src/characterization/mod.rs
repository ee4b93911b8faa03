//! Workload characterization: standardized profiling features, k-means
//! clustering, and a 2-D t-SNE embedding for plotting.

mod features;
pub mod kmeans;
pub mod tsne;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use features::FeatureMatrix;
pub use kmeans::{adjusted_rand_index, kmeans, ClusterResult, KMeans};
pub use tsne::{tsne, Embedding2D, Tsne};

use crate::error::{Error, Result};
use crate::types::ProfileVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureMode {
    /// The five profiler ratios.
    ArchDependent,
    /// Parameter count, epochs to quality, FLOPs per forward pass.
    ArchIndependent,
}

impl fmt::Display for FeatureMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureMode::ArchDependent => "arch_dependent",
            FeatureMode::ArchIndependent => "arch_independent",
        })
    }
}

impl std::str::FromStr for FeatureMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "arch_dependent" | "arch-dependent" => Ok(FeatureMode::ArchDependent),
            "arch_independent" | "arch-independent" => Ok(FeatureMode::ArchIndependent),
            other => Err(format!(
                "unknown mode `{other}` (expected arch_dependent or arch_independent)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharacterizeOptions {
    pub mode: FeatureMode,
    pub k: usize,
    pub perplexity: f64,
    pub seed: u64,
    pub tsne_iterations: usize,
}

impl Default for CharacterizeOptions {
    fn default() -> Self {
        CharacterizeOptions {
            mode: FeatureMode::ArchDependent,
            k: kmeans::DEFAULT_K,
            perplexity: tsne::DEFAULT_PERPLEXITY,
            seed: 42,
            tsne_iterations: tsne::DEFAULT_ITERATIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Characterization {
    pub mode: FeatureMode,
    pub workload_ids: Vec<String>,
    pub feature_names: Vec<String>,
    /// Always true: features are z-scored before clustering.
    pub standardized: bool,
    pub clusters: ClusterResult,
    /// Absent when fewer than four workloads are usable.
    pub embedding: Option<Embedding2D>,
    /// Workloads lacking a feature the mode needs.
    pub dropped: Vec<String>,
}

/// Builds the feature matrix for `mode`, dropping vectors that lack any of
/// the mode's features.
pub fn feature_matrix(
    vectors: &[ProfileVector],
    mode: FeatureMode,
) -> Result<(FeatureMatrix, Vec<String>)> {
    let names: Vec<String> = match mode {
        FeatureMode::ArchDependent => ProfileVector::RATIO_FEATURES.iter(),
        FeatureMode::ArchIndependent => ProfileVector::INDEPENDENT_FEATURES.iter(),
    }
    .map(|s| s.to_string())
    .collect();
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    let mut dropped = Vec::new();
    for v in vectors {
        let row = match mode {
            FeatureMode::ArchDependent => v.ratio_features().map(|r| r.to_vec()),
            FeatureMode::ArchIndependent => v.independent_features().map(|r| r.to_vec()),
        };
        match row {
            Some(row) => {
                ids.push(v.workload_id.clone());
                rows.push(row);
            }
            None => dropped.push(v.workload_id.clone()),
        }
    }
    Ok((FeatureMatrix::new(ids, names, rows)?, dropped))
}

/// Standardizes the usable vectors, clusters them and embeds them.
pub fn characterize(
    vectors: &[ProfileVector],
    options: &CharacterizeOptions,
) -> Result<Characterization> {
    let (matrix, dropped) = feature_matrix(vectors, options.mode)?;
    let usable = matrix.n_rows();
    if usable < options.k.max(1) {
        return Err(Error::Domain(format!(
            "{usable} usable workloads for {} mode, need at least k = {}",
            options.mode, options.k
        )));
    }
    let tsne = Tsne::new(options.seed)
        .perplexity(options.perplexity)
        .iterations(options.tsne_iterations);

    let standardized = if usable >= 2 {
        matrix.standardize()?
    } else {
        // A lone row has no spread; its z-score is all zeros.
        let rows = vec![vec![0.0; matrix.n_features()]; usable];
        FeatureMatrix::new(
            matrix.workload_ids().to_vec(),
            matrix.feature_names().to_vec(),
            rows,
        )?
        .assume_standardized()
    };
    let embedding = if usable >= 4 {
        tsne.check(&standardized)?;
        Some(tsne.fit(&standardized)?)
    } else {
        None
    };
    let clusters = KMeans::new(options.k, options.seed).fit(&standardized)?;

    Ok(Characterization {
        mode: options.mode,
        workload_ids: standardized.workload_ids().to_vec(),
        feature_names: standardized.feature_names().to_vec(),
        standardized: true,
        clusters,
        embedding,
        dropped,
    })
}
