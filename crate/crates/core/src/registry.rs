//! Built-in benchmark specifications and run validation.

use std::sync::OnceLock;

use crate::error::{Error, Result};
use crate::types::{BenchmarkSpec, QualityMetric, RunRecord};

pub const EWA: &str = "ewa";
pub const IMAGE_CLASSIFICATION: &str = "image_classification";

fn builtin_specs() -> Vec<BenchmarkSpec> {
    vec![
        BenchmarkSpec {
            id: EWA.into(),
            problem_domain: "Extreme Weather Analytics".into(),
            model_name: "Faster-RCNN".into(),
            dataset_name: "EWA".into(),
            quality_metric: QualityMetric::MapIou050,
            target_quality: 0.35,
            required_epochs: 50,
            penalty_exponent: 10,
        },
        BenchmarkSpec {
            id: IMAGE_CLASSIFICATION.into(),
            problem_domain: "Image Classification".into(),
            model_name: "ResNet-50 v1.5".into(),
            dataset_name: "ImageNet".into(),
            quality_metric: QualityMetric::Top1Accuracy,
            target_quality: 0.763,
            required_epochs: 90,
            penalty_exponent: 5,
        },
    ]
}

/// An immutable set of benchmark specs keyed by id.
///
/// The two suite benchmarks are always present; overrides may add specs or
/// replace fields of a built-in one by reusing its id.
#[derive(Debug, Clone, PartialEq)]
pub struct Registry {
    specs: Vec<BenchmarkSpec>,
}

impl Registry {
    pub fn builtin() -> &'static Registry {
        static BUILTIN: OnceLock<Registry> = OnceLock::new();
        BUILTIN.get_or_init(|| Registry {
            specs: builtin_specs(),
        })
    }

    pub fn with_overrides(overrides: impl IntoIterator<Item = BenchmarkSpec>) -> Result<Registry> {
        let mut specs = builtin_specs();
        for spec in overrides {
            spec.validate()?;
            match specs.iter_mut().find(|s| s.id == spec.id) {
                Some(slot) => *slot = spec,
                None => specs.push(spec),
            }
        }
        Ok(Registry { specs })
    }

    pub fn lookup(&self, benchmark_id: &str) -> Result<&BenchmarkSpec> {
        self.specs
            .iter()
            .find(|s| s.id == benchmark_id)
            .ok_or_else(|| Error::UnknownBenchmark {
                id: benchmark_id.to_string(),
                known: self.ids().map(str::to_string).collect(),
            })
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.specs.iter().map(|s| s.id.as_str())
    }

    pub fn specs(&self) -> &[BenchmarkSpec] {
        &self.specs
    }
}

/// Looks a spec up in the built-in registry.
pub fn registry_lookup(benchmark_id: &str) -> Result<BenchmarkSpec> {
    Registry::builtin().lookup(benchmark_id).cloned()
}

/// Checks a run against the rules of its benchmark.
///
/// Returns one human-readable line per broken rule, in a fixed rule order;
/// an empty list means the run is a valid submission. Runs must train for
/// exactly the required number of epochs.
pub fn validate_run(run: &RunRecord, spec: &BenchmarkSpec) -> Vec<String> {
    let mut violations = Vec::new();
    if run.benchmark_id != spec.id {
        violations.push(format!(
            "benchmark_id {} != spec id {}",
            run.benchmark_id, spec.id
        ));
    }
    if !spec.quality_metric.higher_is_better() {
        violations.push(format!(
            "quality metric {} is lower-is-better; only higher-is-better metrics can be scored",
            spec.quality_metric.name()
        ));
    }
    if run.run_id.is_empty() {
        violations.push("run_id must not be empty".into());
    }
    if run.accelerator_count == 0 {
        violations.push("accelerator_count must be >= 1".into());
    }
    if !(run.sustained_flops.is_finite() && run.sustained_flops > 0.0) {
        violations.push(format!(
            "sustained_flops {} must be finite and > 0",
            run.sustained_flops
        ));
    }
    if !(run.wall_clock_seconds.is_finite() && run.wall_clock_seconds > 0.0) {
        violations.push(format!(
            "wall_clock_seconds {} must be finite and > 0",
            run.wall_clock_seconds
        ));
    }
    if !(0.0..=1.0).contains(&run.achieved_quality) {
        violations.push(format!(
            "achieved_quality {} outside [0, 1]",
            run.achieved_quality
        ));
    }
    if run.epochs_run != spec.required_epochs {
        violations.push(format!(
            "epochs_run {} != required {}",
            run.epochs_run, spec.required_epochs
        ));
    }
    violations
}

/// Published metadata for one AIBench Training workload.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AiBenchWorkload {
    pub id: &'static str,
    pub name: &'static str,
    /// Run-to-run variation of epochs-to-quality as a fraction; `None` where
    /// no accepted stopping criterion exists.
    pub variation: Option<f64>,
    pub runs: Option<u32>,
    /// Whether parameter size, convergence rate and FLOPs are all defined,
    /// which admits the workload to architecture-independent clustering.
    pub independent_features_defined: bool,
}

const fn wl(
    id: &'static str,
    name: &'static str,
    variation: Option<f64>,
    runs: Option<u32>,
    independent_features_defined: bool,
) -> AiBenchWorkload {
    AiBenchWorkload {
        id,
        name,
        variation,
        runs,
        independent_features_defined,
    }
}

pub const AIBENCH_WORKLOADS: [AiBenchWorkload; 17] = [
    wl(
        "DC-AI-C1",
        "Image classification",
        Some(0.0112),
        Some(5),
        true,
    ),
    wl("DC-AI-C2", "Image generation", None, None, false),
    wl(
        "DC-AI-C3",
        "Text-to-Text translation",
        Some(0.0938),
        Some(6),
        true,
    ),
    wl("DC-AI-C4", "Image-to-Text", Some(0.2353), Some(5), true),
    wl("DC-AI-C5", "Image-to-Image", None, None, false),
    wl(
        "DC-AI-C6",
        "Speech recognition",
        Some(0.1208),
        Some(4),
        true,
    ),
    wl("DC-AI-C7", "Face embedding", Some(0.0573), Some(8), true),
    wl(
        "DC-AI-C8",
        "3D Face Recognition",
        Some(0.3846),
        Some(4),
        true,
    ),
    wl("DC-AI-C9", "Object detection", Some(0.0), Some(10), true),
    wl("DC-AI-C10", "Recommendation", Some(0.0995), Some(5), true),
    wl("DC-AI-C11", "Video prediction", Some(0.1183), Some(4), true),
    wl(
        "DC-AI-C12",
        "Image compression",
        Some(0.2249),
        Some(4),
        true,
    ),
    wl(
        "DC-AI-C13",
        "3D object reconstruction",
        Some(0.1607),
        Some(4),
        true,
    ),
    wl(
        "DC-AI-C14",
        "Text summarization",
        Some(0.2472),
        Some(5),
        true,
    ),
    wl(
        "DC-AI-C15",
        "Spatial transformer",
        Some(0.0729),
        Some(4),
        true,
    ),
    wl("DC-AI-C16", "Learning to rank", Some(0.0190), Some(4), true),
    wl(
        "DC-AI-C17",
        "Neural architecture search",
        Some(0.0615),
        Some(6),
        false,
    ),
];

pub fn aibench_workload(id: &str) -> Option<&'static AiBenchWorkload> {
    AIBENCH_WORKLOADS.iter().find(|w| w.id == id)
}
