//! Run-to-run variation of epochs-to-quality.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RunRecord;

pub const DEFAULT_THRESHOLD: f64 = 0.02;

/// Coefficient of variation over repeated runs.
///
/// `variation` is a fraction; multiply by 100 only for display.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationReport {
    pub workload_id: String,
    pub runs: usize,
    pub mean_epochs: f64,
    /// Sample standard deviation (N - 1 divisor).
    pub stddev_epochs: f64,
    pub variation: f64,
}

impl VariationReport {
    pub fn variation_percent(&self) -> String {
        format!("{:.2}%", self.variation * 100.0)
    }
}

/// Coefficient of variation of `epochs_samples`, using the sample standard
/// deviation.
pub fn variation(workload_id: &str, epochs_samples: &[f64]) -> Result<VariationReport> {
    if epochs_samples.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: epochs_samples.len(),
        });
    }
    if let Some((index, &value)) = epochs_samples
        .iter()
        .enumerate()
        .find(|(_, &x)| !(x.is_finite() && x > 0.0))
    {
        return Err(Error::NonPositiveSample { index, value });
    }
    let n = epochs_samples.len() as f64;
    let mean = epochs_samples.iter().sum::<f64>() / n;
    let sum_sq: f64 = epochs_samples.iter().map(|x| (x - mean).powi(2)).sum();
    let stddev = (sum_sq / (n - 1.0)).sqrt();
    Ok(VariationReport {
        workload_id: workload_id.to_string(),
        runs: epochs_samples.len(),
        mean_epochs: mean,
        stddev_epochs: stddev,
        variation: stddev / mean,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Repeatability {
    Repeatable,
    Unrepeatable,
}

impl fmt::Display for Repeatability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Repeatability::Repeatable => "repeatable",
            Repeatability::Unrepeatable => "unrepeatable",
        })
    }
}

/// Repeatable iff `variation <= threshold` (both fractions).
pub fn classify_repeatability(report: &VariationReport, threshold: f64) -> Repeatability {
    if report.variation <= threshold {
        Repeatability::Repeatable
    } else {
        Repeatability::Unrepeatable
    }
}

/// Which runs count as repeats of one another.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GroupBy {
    /// Benchmark, system, accelerator count, precision, compression, and
    /// seed when the run records one.
    #[default]
    Config,
    /// Benchmark and system.
    System,
    Benchmark,
}

impl std::str::FromStr for GroupBy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "config" => Ok(GroupBy::Config),
            "system" => Ok(GroupBy::System),
            "benchmark" => Ok(GroupBy::Benchmark),
            other => Err(format!(
                "unknown grouping `{other}` (expected config, system or benchmark)"
            )),
        }
    }
}

pub fn group_key(run: &RunRecord, by: GroupBy) -> String {
    match by {
        GroupBy::Benchmark => run.benchmark_id.clone(),
        GroupBy::System => format!("{}/{}", run.benchmark_id, run.system_name),
        GroupBy::Config => {
            let mut key = format!(
                "{}/{}/p={},{},compression={}",
                run.benchmark_id,
                run.system_name,
                run.accelerator_count,
                run.precision_mode,
                run.comm_compression
            );
            if let Some(seed) = run.seed {
                key.push_str(&format!(",seed={seed}"));
            }
            key
        }
    }
}

/// Epochs-to-quality samples per group, keys in sorted order.
pub fn group_epochs(runs: &[RunRecord], by: GroupBy) -> BTreeMap<String, Vec<f64>> {
    let mut groups: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for run in runs {
        groups
            .entry(group_key(run, by))
            .or_default()
            .push(f64::from(run.epochs_run));
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn report(variation: f64) -> VariationReport {
        VariationReport {
            workload_id: "w".into(),
            runs: 4,
            mean_epochs: 1.0,
            stddev_epochs: variation,
            variation,
        }
    }

    #[test]
    fn constant_samples_have_zero_variation() {
        let r = variation("object_detection", &[50.0; 4]).unwrap();
        assert_eq!(r.variation, 0.0);
        assert_eq!(r.variation_percent(), "0.00%");
    }

    #[test]
    fn hand_computed_sample() {
        let r = variation("w", &[9.0, 10.0, 11.0]).unwrap();
        assert_eq!(r.mean_epochs, 10.0);
        assert_eq!(r.stddev_epochs, 1.0);
        assert_eq!(r.variation, 0.1);
    }

    #[test]
    fn two_sample_case() {
        // sqrt(2)/61 = 0.0231838288913622...
        let r = variation("w", &[60.0, 62.0]).unwrap();
        assert_abs_diff_eq!(r.variation * 100.0, 2.3188, epsilon = 1e-3);
        assert_abs_diff_eq!(r.variation, 0.023_183_828_891_362_2, epsilon = 1e-15);
    }

    #[test]
    fn sample_errors() {
        assert!(matches!(
            variation("w", &[1.0]),
            Err(Error::TooFewSamples { .. })
        ));
        assert!(matches!(
            variation("w", &[1.0, 0.0]),
            Err(Error::NonPositiveSample { index: 1, .. })
        ));
    }

    #[test]
    fn classification_against_published_variations() {
        assert_eq!(
            classify_repeatability(&report(0.0112), DEFAULT_THRESHOLD),
            Repeatability::Repeatable
        );
        assert_eq!(
            classify_repeatability(&report(0.3846), DEFAULT_THRESHOLD),
            Repeatability::Unrepeatable
        );
        assert_eq!(
            classify_repeatability(&report(0.02), DEFAULT_THRESHOLD),
            Repeatability::Repeatable
        );
        assert_eq!(
            classify_repeatability(&report(0.0112), 0.01),
            Repeatability::Unrepeatable
        );
    }

    proptest! {
        #[test]
        fn scale_invariant(samples in proptest::collection::vec(1.0f64..500.0, 2..12), c in 0.01f64..100.0) {
            let base = variation("w", &samples).unwrap().variation;
            let scaled: Vec<f64> = samples.iter().map(|x| x * c).collect();
            let v = variation("w", &scaled).unwrap().variation;
            prop_assert!((v - base).abs() <= 1e-12 * base.max(1.0));
        }

        #[test]
        fn shifting_up_reduces_variation(samples in proptest::collection::vec(1.0f64..500.0, 2..12), shift in 1.0f64..1000.0) {
            let base = variation("w", &samples).unwrap();
            prop_assume!(base.stddev_epochs > 1e-6);
            let shifted: Vec<f64> = samples.iter().map(|x| x + shift).collect();
            prop_assert!(variation("w", &shifted).unwrap().variation < base.variation);
        }

        #[test]
        fn permutation_invariant(samples in proptest::collection::vec(1.0f64..500.0, 2..12), seed in any::<u64>()) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = samples.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = variation("w", &samples).unwrap().variation;
            let b = variation("w", &shuffled).unwrap().variation;
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }
    }
}
