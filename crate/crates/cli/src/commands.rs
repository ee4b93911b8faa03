use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use hpcai500_core::characterization::{
    characterize, Characterization, CharacterizeOptions, FeatureMode,
};
use hpcai500_core::ingest::{read_profiles_file, read_runs_file};
use hpcai500_core::repeatability::{
    classify_repeatability, group_epochs, variation, GroupBy, Repeatability,
};
use hpcai500_core::report::{emit, rank, OutputFormat, ScoredRun};
use hpcai500_core::scaling::{predictions_to_csv, scaling_curve, CommModel};
use hpcai500_core::scoring::score_with_registry;
use hpcai500_core::{validate_run, PrecisionMode, Registry, RunRecord};
use serde::Serialize;

/// How a command finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Success,
    /// Input was readable but broke a domain rule.
    Violations,
}

fn write_stdout(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
    eprintln!("wrote {}", path.display());
    Ok(path)
}

fn load_runs(path: &Path) -> Result<Vec<RunRecord>> {
    Ok(read_runs_file(path)?.records)
}

pub fn validate(runs_path: &Path, registry: &Registry) -> Result<Outcome> {
    let runs = load_runs(runs_path)?;
    let mut lines = String::new();
    for run in &runs {
        let spec = registry.lookup(&run.benchmark_id)?;
        for violation in validate_run(run, spec) {
            lines.push_str(&format!("{}: {}\n", run.run_id, violation));
        }
    }
    write_stdout(&lines)?;
    Ok(if lines.is_empty() {
        Outcome::Success
    } else {
        Outcome::Violations
    })
}

fn score_all(runs: Vec<RunRecord>, registry: &Registry) -> Result<Vec<ScoredRun>> {
    runs.into_iter()
        .map(|run| {
            let report = score_with_registry(&run, registry)?;
            Ok(ScoredRun { run, report })
        })
        .collect()
}

pub fn score(runs_path: &Path, registry: &Registry) -> Result<Outcome> {
    let scored = score_all(load_runs(runs_path)?, registry)?;
    for s in scored.iter().filter(|s| s.report.awarded) {
        eprintln!(
            "note: {} beat the target quality; penalty coefficient {:.4} > 1",
            s.run.run_id, s.report.penalty_coefficient
        );
    }
    let reports: Vec<_> = scored.iter().map(|s| &s.report).collect();
    let mut json = serde_json::to_string_pretty(&reports)?;
    json.push('\n');
    write_stdout(&json)?;
    Ok(Outcome::Success)
}

pub fn rank_runs(
    runs_path: &Path,
    registry: &Registry,
    format: OutputFormat,
    include_invalid: bool,
    output: Option<&Path>,
) -> Result<Outcome> {
    let scored = score_all(load_runs(runs_path)?, registry)?;
    let entries = rank(&scored, include_invalid)?;
    let excluded = scored.len() - entries.len();
    if excluded > 0 {
        eprintln!("excluded {excluded} invalid run(s); pass --include-invalid to list them");
    }
    let text = emit(&entries, format);
    match output {
        Some(path) => {
            fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("wrote {}", path.display());
        }
        None => write_stdout(&text)?,
    }
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct VariationRow {
    group: String,
    runs: usize,
    mean_epochs: f64,
    stddev_epochs: f64,
    variation: f64,
    variation_percent: String,
    classification: Repeatability,
}

pub fn variation_report(runs_path: &Path, group_by: GroupBy, threshold: f64) -> Result<Outcome> {
    let runs = load_runs(runs_path)?;
    let mut rows = Vec::new();
    for (group, samples) in group_epochs(&runs, group_by) {
        if samples.len() < 2 {
            eprintln!(
                "warning: skipping group {group}: only {} run",
                samples.len()
            );
            continue;
        }
        let report = variation(&group, &samples)?;
        rows.push(VariationRow {
            classification: classify_repeatability(&report, threshold),
            variation_percent: report.variation_percent(),
            group,
            runs: report.runs,
            mean_epochs: report.mean_epochs,
            stddev_epochs: report.stddev_epochs,
            variation: report.variation,
        });
    }
    let mut json = serde_json::to_string_pretty(&rows)?;
    json.push('\n');
    write_stdout(&json)?;
    Ok(Outcome::Success)
}

#[derive(Serialize)]
struct ClusterLabel<'a> {
    workload_id: &'a str,
    cluster: usize,
}

#[derive(Serialize)]
struct ClustersFile<'a> {
    mode: FeatureMode,
    feature_names: &'a [String],
    standardized: bool,
    k: usize,
    seed: u64,
    labels: Vec<ClusterLabel<'a>>,
    centroids: &'a [Vec<f64>],
    inertia: f64,
    iterations: usize,
    dropped: &'a [String],
    perplexity: f64,
    final_kl: Option<f64>,
    kl_log_base: &'static str,
    perplexity_entropy_base: u32,
}

pub fn clusters_json(c: &Characterization, perplexity: f64) -> Result<String> {
    let file = ClustersFile {
        mode: c.mode,
        feature_names: &c.feature_names,
        standardized: c.standardized,
        k: c.clusters.k,
        seed: c.clusters.seed,
        labels: c
            .workload_ids
            .iter()
            .zip(&c.clusters.labels)
            .map(|(id, &cluster)| ClusterLabel {
                workload_id: id,
                cluster,
            })
            .collect(),
        centroids: &c.clusters.centroids,
        inertia: c.clusters.inertia,
        iterations: c.clusters.iterations,
        dropped: &c.dropped,
        perplexity,
        final_kl: c.embedding.as_ref().map(|e| e.final_kl),
        kl_log_base: "e",
        perplexity_entropy_base: 2,
    };
    let mut json = serde_json::to_string_pretty(&file)?;
    json.push('\n');
    Ok(json)
}

pub fn embedding_csv(c: &Characterization) -> String {
    let mut out = String::from("workload_id,x,y,cluster\n");
    for (i, (id, label)) in c.workload_ids.iter().zip(&c.clusters.labels).enumerate() {
        let (x, y) = match &c.embedding {
            Some(e) => (e.coords[i][0].to_string(), e.coords[i][1].to_string()),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!("{},{x},{y},{label}\n", csv_field(id)));
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn cluster(
    profiles_path: &Path,
    options: &CharacterizeOptions,
    out_dir: &Path,
) -> Result<Outcome> {
    let dump = read_profiles_file(profiles_path)?;
    let result = characterize(&dump.vectors, options)?;
    for id in &result.dropped {
        eprintln!(
            "warning: dropped {id}: missing features for {} mode",
            options.mode
        );
    }
    if result.embedding.is_none() {
        eprintln!("warning: fewer than 4 usable workloads; embedding skipped");
    }
    write_file(out_dir, "embedding.csv", &embedding_csv(&result))?;
    write_file(
        out_dir,
        "clusters.json",
        &clusters_json(&result, options.perplexity)?,
    )?;
    Ok(Outcome::Success)
}

pub struct RunFilter {
    pub benchmark: Option<String>,
    pub system: Option<String>,
    pub precision: Option<PrecisionMode>,
    pub compression: Option<bool>,
}

impl RunFilter {
    fn keeps(&self, run: &RunRecord) -> bool {
        self.benchmark
            .as_ref()
            .is_none_or(|b| *b == run.benchmark_id)
            && self.system.as_ref().is_none_or(|s| *s == run.system_name)
            && self.precision.is_none_or(|p| p == run.precision_mode)
            && self.compression.is_none_or(|c| c == run.comm_compression)
    }
}

pub fn scaling_from_runs(
    runs_path: &Path,
    baseline: u32,
    filter: &RunFilter,
    out_dir: &Path,
) -> Result<Outcome> {
    let runs: Vec<RunRecord> = load_runs(runs_path)?
        .into_iter()
        .filter(|r| filter.keeps(r))
        .collect();
    if runs.is_empty() {
        bail!("no runs left after filtering");
    }
    let curve = scaling_curve(&runs, baseline)?;
    for p in curve.superlinear_points() {
        eprintln!(
            "warning: superlinear efficiency {:.3} at scale {}",
            p.efficiency, p.scale
        );
    }
    write_file(out_dir, "scaling.csv", &curve.to_csv())?;
    Ok(Outcome::Success)
}

pub fn scaling_from_model(model_path: &Path, scales: &[u32], out_dir: &Path) -> Result<Outcome> {
    let text = fs::read_to_string(model_path)
        .with_context(|| format!("reading {}", model_path.display()))?;
    let model: CommModel = serde_json::from_str(&text)
        .with_context(|| format!("parsing model {}", model_path.display()))?;
    if scales.contains(&0) {
        bail!("scales must be >= 1");
    }
    let predictions: Vec<_> = scales.iter().map(|&p| model.predict(p)).collect();
    write_file(out_dir, "prediction.csv", &predictions_to_csv(&predictions))?;
    Ok(Outcome::Success)
}
