use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hpcai500_core::characterization::{kmeans, tsne};
use hpcai500_core::repeatability::DEFAULT_THRESHOLD;
use hpcai500_core::{BenchmarkSpec, Registry};
use serde::Deserialize;

pub const DEFAULT_SEED: u64 = 42;

/// Settings shared by every command, loaded from an optional TOML file.
///
/// ```toml
/// seed = 7
/// threshold = 0.05
/// k = 4
/// perplexity = 5.0
/// output_dir = "results"
///
/// [[benchmark]]
/// id = "image_classification"
/// # ... every BenchmarkSpec field
/// ```
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default = "default_perplexity")]
    pub perplexity: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default, rename = "benchmark")]
    pub benchmarks: Vec<BenchmarkSpec>,
}

fn default_seed() -> u64 {
    DEFAULT_SEED
}
fn default_threshold() -> f64 {
    DEFAULT_THRESHOLD
}
fn default_k() -> usize {
    kmeans::DEFAULT_K
}
fn default_perplexity() -> f64 {
    tsne::DEFAULT_PERPLEXITY
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: DEFAULT_SEED,
            threshold: DEFAULT_THRESHOLD,
            k: kmeans::DEFAULT_K,
            perplexity: tsne::DEFAULT_PERPLEXITY,
            output_dir: None,
            benchmarks: Vec::new(),
        }
    }
}

impl Config {
    pub fn load(path: Option<&Path>) -> Result<Config> {
        let config = match path {
            None => Config::default(),
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("reading config {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("parsing config {}", path.display()))?
            }
        };
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold.is_finite() && self.threshold >= 0.0) {
            bail!(
                "threshold must be a non-negative fraction, got {}",
                self.threshold
            );
        }
        if self.k == 0 {
            bail!("k must be >= 1");
        }
        if !(self.perplexity.is_finite() && self.perplexity > 1.0) {
            bail!("perplexity must be > 1, got {}", self.perplexity);
        }
        for spec in &self.benchmarks {
            spec.validate()?;
        }
        Ok(())
    }

    pub fn registry(&self) -> Result<Registry> {
        Ok(Registry::with_overrides(self.benchmarks.iter().cloned())?)
    }
}

/// Accepts `0.02` or `2%`.
pub fn parse_fraction(text: &str) -> std::result::Result<f64, String> {
    let value = match text.trim().strip_suffix('%') {
        Some(pct) => pct.trim().parse::<f64>().map(|v| v / 100.0),
        None => text.trim().parse::<f64>(),
    }
    .map_err(|_| format!("`{text}` is not a number"))?;
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(format!("`{text}` must be a non-negative finite number"))
    }
}
