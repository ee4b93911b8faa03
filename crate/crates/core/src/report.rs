//! Ranking lists and their JSON, CSV and Markdown renderings.

use std::cmp::Ordering;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{PrecisionMode, RunRecord, ScoreReport, TimeToQuality};

/// A run together with its score.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoredRun {
    pub run: RunRecord,
    pub report: ScoreReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankingEntry {
    pub rank: u32,
    pub system_name: String,
    pub benchmark_id: String,
    pub run_id: String,
    pub vflops: f64,
    pub penalty_coefficient: f64,
    pub time_to_quality_seconds: TimeToQuality,
    pub scale: u32,
    pub precision_mode: PrecisionMode,
    pub valid: bool,
}

/// Orders scored runs by VFLOPS, best first.
///
/// Ties fall back to time-to-quality (unreached last), then system name,
/// then run id, so the order is total and ranks are dense (1, 2, 3, ...).
/// Invalid runs are left out unless `include_invalid` is set.
pub fn rank(scored: &[ScoredRun], include_invalid: bool) -> Result<Vec<RankingEntry>> {
    if let Some(first) = scored.first() {
        if let Some(other) = scored
            .iter()
            .find(|s| s.report.benchmark_id != first.report.benchmark_id)
        {
            return Err(Error::MixedRuns {
                what: "benchmarks",
                first: first.report.benchmark_id.clone(),
                second: other.report.benchmark_id.clone(),
            });
        }
    }
    let mut kept: Vec<&ScoredRun> = scored
        .iter()
        .filter(|s| include_invalid || s.report.valid)
        .collect();
    kept.sort_by(|a, b| ranking_order(a, b));
    Ok(kept
        .into_iter()
        .zip(1u32..)
        .map(|(s, rank)| RankingEntry {
            rank,
            system_name: s.run.system_name.clone(),
            benchmark_id: s.report.benchmark_id.clone(),
            run_id: s.run.run_id.clone(),
            vflops: s.report.vflops,
            penalty_coefficient: s.report.penalty_coefficient,
            time_to_quality_seconds: s.report.time_to_quality_seconds,
            scale: s.run.accelerator_count,
            precision_mode: s.run.precision_mode,
            valid: s.report.valid,
        })
        .collect())
}

fn ranking_order(a: &ScoredRun, b: &ScoredRun) -> Ordering {
    b.report
        .vflops
        .total_cmp(&a.report.vflops)
        .then_with(|| {
            a.report
                .time_to_quality_seconds
                .cmp_ascending(b.report.time_to_quality_seconds)
        })
        .then_with(|| a.run.system_name.cmp(&b.run.system_name))
        .then_with(|| a.run.run_id.cmp(&b.run.run_id))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
    Markdown,
}

impl std::str::FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "json" => Ok(OutputFormat::Json),
            "csv" => Ok(OutputFormat::Csv),
            "markdown" | "md" => Ok(OutputFormat::Markdown),
            other => Err(format!(
                "unknown format `{other}` (expected json, csv or markdown)"
            )),
        }
    }
}

const FLOPS_UNITS: [(&str, f64); 7] = [
    ("FLOPS", 1.0),
    ("KFLOPS", 1e3),
    ("MFLOPS", 1e6),
    ("GFLOPS", 1e9),
    ("TFLOPS", 1e12),
    ("PFLOPS", 1e15),
    ("EFLOPS", 1e18),
];

fn integer_digits(x: f64) -> usize {
    if x < 1.0 {
        1
    } else {
        format!("{:.0}", x.trunc()).len()
    }
}

/// Splits a FLOP/s value into a 4-significant-digit mantissa and an SI unit,
/// e.g. `9.39e14` -> `("939.0", "TFLOPS")`.
pub fn si_flops(value: f64) -> (String, &'static str) {
    if value == 0.0 || !value.is_finite() {
        return (format!("{value:.3}"), FLOPS_UNITS[0].0);
    }
    let magnitude = value.abs();
    let mut idx = FLOPS_UNITS
        .iter()
        .rposition(|&(_, scale)| magnitude >= scale)
        .unwrap_or(0);
    loop {
        let (unit, scale) = FLOPS_UNITS[idx];
        let x = value / scale;
        let digits = integer_digits(x.abs());
        let decimals = 4usize.saturating_sub(digits);
        let mut text = format!("{x:.decimals$}");
        let rounded: f64 = text.parse().expect("formatted float parses");
        if rounded.abs() >= 1000.0 && idx + 1 < FLOPS_UNITS.len() {
            idx += 1;
            continue;
        }
        if integer_digits(rounded.abs()) > digits && decimals > 0 {
            text = format!("{x:.prec$}", prec = decimals - 1);
        }
        return (text, unit);
    }
}

pub fn format_flops(value: f64) -> String {
    let (number, unit) = si_flops(value);
    format!("{number} {unit}")
}

fn format_ttq(ttq: TimeToQuality) -> String {
    match ttq {
        TimeToQuality::Reached(s) => format!("{s:.1}"),
        TimeToQuality::Unreached => "unreached".into(),
    }
}

/// Renders a ranking. JSON carries full precision and parses back with
/// [`parse_ranking_json`]; CSV and Markdown round VFLOPS for reading.
pub fn emit(entries: &[RankingEntry], format: OutputFormat) -> String {
    match format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(entries).expect("entries serialize");
            s.push('\n');
            s
        }
        OutputFormat::Csv => emit_csv(entries),
        OutputFormat::Markdown => emit_markdown(entries),
    }
}

fn emit_csv(entries: &[RankingEntry]) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "rank",
            "system",
            "benchmark",
            "run_id",
            "vflops",
            "vflops_unit",
            "penalty",
            "ttq_seconds",
            "scale",
            "precision",
            "valid",
        ])
        .expect("in-memory write");
    for e in entries {
        let (vflops, unit) = si_flops(e.vflops);
        writer
            .write_record([
                e.rank.to_string(),
                e.system_name.clone(),
                e.benchmark_id.clone(),
                e.run_id.clone(),
                vflops,
                unit.to_string(),
                format!("{:.4}", e.penalty_coefficient),
                format_ttq(e.time_to_quality_seconds),
                e.scale.to_string(),
                e.precision_mode.to_string(),
                e.valid.to_string(),
            ])
            .expect("in-memory write");
    }
    let bytes = writer.into_inner().expect("in-memory flush");
    String::from_utf8(bytes).expect("UTF-8 input yields UTF-8 output")
}

fn emit_markdown(entries: &[RankingEntry]) -> String {
    let mut out = String::from(
        "| Rank | System | VFLOPS | Penalty | TTQ (s) | Scale | Precision |\n\
         |-----:|:-------|-------:|--------:|--------:|------:|:----------|\n",
    );
    for e in entries {
        let mut system = e.system_name.replace('|', "\\|");
        if !e.valid {
            system.push_str(" (invalid)");
        }
        writeln!(
            out,
            "| {} | {} | {} | {:.4} | {} | {} | {} |",
            e.rank,
            system,
            format_flops(e.vflops),
            e.penalty_coefficient,
            format_ttq(e.time_to_quality_seconds),
            e.scale,
            e.precision_mode
        )
        .expect("writing to a String cannot fail");
    }
    out
}

pub fn parse_ranking_json(text: &str) -> Result<Vec<RankingEntry>> {
    Ok(serde_json::from_str(text)?)
}
