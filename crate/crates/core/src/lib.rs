//! Benchmarking toolkit for HPC AI systems.
//!
//! Runs are scored with Valid FLOPS: sustained throughput scaled by
//! `(achieved_quality / target_quality)^n`. Around that metric the crate
//! provides the registry of suite benchmarks, readers for run files and
//! profiler dumps, run-to-run variation, workload characterization
//! (k-means and t-SNE over profiling features), scaling analysis with an
//! all-reduce cost model, and ranking output.

pub mod characterization;
pub mod error;
pub mod ingest;
pub mod registry;
pub mod repeatability;
pub mod report;
pub mod scaling;
pub mod scoring;
pub mod types;

pub use error::{Error, Result};
pub use registry::{registry_lookup, validate_run, Registry};
pub use types::{
    BenchmarkSpec, PrecisionMode, ProfileVector, QualityMetric, RunRecord, ScoreReport,
    TimeToQuality,
};
