//! Value types shared by every module.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// How a benchmark measures model quality.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QualityMetric {
    /// Mean average precision counting IoU >= 0.5 as a hit.
    MapIou050,
    Top1Accuracy,
    Other {
        name: String,
        #[serde(default = "default_true")]
        higher_is_better: bool,
    },
}

fn default_true() -> bool {
    true
}

impl QualityMetric {
    pub fn name(&self) -> &str {
        match self {
            QualityMetric::MapIou050 => "mAP@[IoU=0.5]",
            QualityMetric::Top1Accuracy => "top-1 accuracy",
            QualityMetric::Other { name, .. } => name,
        }
    }

    pub fn higher_is_better(&self) -> bool {
        match self {
            QualityMetric::Other {
                higher_is_better, ..
            } => *higher_is_better,
            _ => true,
        }
    }
}

/// One benchmark of the suite: what to train, on what, to which quality.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub id: String,
    pub problem_domain: String,
    pub model_name: String,
    pub dataset_name: String,
    pub quality_metric: QualityMetric,
    pub target_quality: f64,
    pub required_epochs: u32,
    /// Sensitivity exponent applied to the quality ratio.
    pub penalty_exponent: u32,
}

impl BenchmarkSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| {
            Err(Error::InvalidSpec {
                id: self.id.clone(),
                reason,
            })
        };
        if self.id.is_empty() {
            return fail("id must not be empty".into());
        }
        if !(self.target_quality > 0.0 && self.target_quality <= 1.0) {
            return fail(format!(
                "target_quality {} outside (0, 1]",
                self.target_quality
            ));
        }
        if self.required_epochs == 0 {
            return fail("required_epochs must be >= 1".into());
        }
        if self.penalty_exponent == 0 {
            return fail("penalty_exponent must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PrecisionMode {
    Fp32,
    Mixed,
}

impl PrecisionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PrecisionMode::Fp32 => "fp32",
            PrecisionMode::Mixed => "mixed",
        }
    }
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PrecisionMode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "fp32" => Ok(PrecisionMode::Fp32),
            "mixed" => Ok(PrecisionMode::Mixed),
            other => Err(format!(
                "unknown precision mode `{other}` (expected fp32 or mixed)"
            )),
        }
    }
}

/// One measured training session.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub run_id: String,
    pub benchmark_id: String,
    pub system_name: String,
    pub accelerator_count: u32,
    pub precision_mode: PrecisionMode,
    pub comm_compression: bool,
    /// FLOP/s sustained over the session.
    pub sustained_flops: f64,
    pub achieved_quality: f64,
    pub epochs_run: u32,
    pub wall_clock_seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<i64>,
}

/// Profiling features of one workload.
///
/// The five ratios are fractions in `[0, 1]`; `dram_utilization` is the
/// profiler's 0-10 level divided by ten. Any field may be absent in a dump,
/// which decides the clustering modes the vector can take part in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileVector {
    pub workload_id: String,
    pub achieved_occupancy: Option<f64>,
    pub ipc_efficiency: Option<f64>,
    pub gld_efficiency: Option<f64>,
    pub gst_efficiency: Option<f64>,
    pub dram_utilization: Option<f64>,
    pub parameter_count: Option<u64>,
    pub epochs_to_quality: Option<f64>,
    pub flops_per_forward: Option<f64>,
}

impl ProfileVector {
    pub const RATIO_FEATURES: [&'static str; 5] = [
        "achieved_occupancy",
        "ipc_efficiency",
        "gld_efficiency",
        "gst_efficiency",
        "dram_utilization",
    ];

    pub const INDEPENDENT_FEATURES: [&'static str; 3] =
        ["parameter_count", "epochs_to_quality", "flops_per_forward"];

    /// The five micro-architectural ratios, if all are present.
    pub fn ratio_features(&self) -> Option<[f64; 5]> {
        Some([
            self.achieved_occupancy?,
            self.ipc_efficiency?,
            self.gld_efficiency?,
            self.gst_efficiency?,
            self.dram_utilization?,
        ])
    }

    /// Model size, convergence rate and compute cost, if all are present.
    pub fn independent_features(&self) -> Option<[f64; 3]> {
        Some([
            self.parameter_count? as f64,
            self.epochs_to_quality?,
            self.flops_per_forward?,
        ])
    }
}

/// Wall-clock time to the target quality, or the marker for a run that
/// stopped short of it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TimeToQuality {
    Reached(f64),
    Unreached,
}

impl TimeToQuality {
    pub fn seconds(self) -> Option<f64> {
        match self {
            TimeToQuality::Reached(s) => Some(s),
            TimeToQuality::Unreached => None,
        }
    }

    /// Ascending seconds with `Unreached` after every number.
    pub fn cmp_ascending(self, other: Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match (self, other) {
            (TimeToQuality::Reached(a), TimeToQuality::Reached(b)) => a.total_cmp(&b),
            (TimeToQuality::Reached(_), TimeToQuality::Unreached) => Ordering::Less,
            (TimeToQuality::Unreached, TimeToQuality::Reached(_)) => Ordering::Greater,
            (TimeToQuality::Unreached, TimeToQuality::Unreached) => Ordering::Equal,
        }
    }
}

impl fmt::Display for TimeToQuality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeToQuality::Reached(s) => write!(f, "{s:.1} s"),
            TimeToQuality::Unreached => f.write_str("unreached"),
        }
    }
}

const UNREACHED: &str = "unreached";

impl Serialize for TimeToQuality {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            TimeToQuality::Reached(s) => serializer.serialize_f64(*s),
            TimeToQuality::Unreached => serializer.serialize_str(UNREACHED),
        }
    }
}

impl<'de> Deserialize<'de> for TimeToQuality {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Seconds(f64),
            Marker(String),
        }
        match Repr::deserialize(deserializer)? {
            Repr::Seconds(s) => Ok(TimeToQuality::Reached(s)),
            Repr::Marker(m) if m == UNREACHED => Ok(TimeToQuality::Unreached),
            Repr::Marker(m) => Err(serde::de::Error::custom(format!(
                "expected seconds or \"{UNREACHED}\", found \"{m}\""
            ))),
        }
    }
}

/// Score of one run against its benchmark.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub run_id: String,
    pub benchmark_id: String,
    pub penalty_coefficient: f64,
    /// Valid FLOP/s: sustained throughput times the penalty coefficient.
    pub vflops: f64,
    pub time_to_quality_seconds: TimeToQuality,
    pub valid: bool,
    pub violations: Vec<String>,
    /// Set when the penalty exceeds one, i.e. quality beat the target.
    pub awarded: bool,
}
