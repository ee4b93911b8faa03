//! Valid-FLOPS scoring.
//!
//! A run's sustained throughput is scaled by
//! `(achieved_quality / target_quality)^n`, so quality shortfall costs
//! throughput and above-target quality earns a bonus. Larger `n` makes the
//! score more sensitive to quality.

use crate::error::{Error, Result};
use crate::registry::{validate_run, Registry};
use crate::types::{BenchmarkSpec, RunRecord, ScoreReport, TimeToQuality};

/// `(achieved / target)^n` in binary64. Not clamped: exceeds 1 when the
/// achieved quality beats the target.
pub fn penalty_coefficient(achieved_quality: f64, target_quality: f64, n: u32) -> Result<f64> {
    if !(target_quality.is_finite() && target_quality > 0.0) {
        return Err(Error::Domain(format!(
            "target_quality {target_quality} must be finite and > 0"
        )));
    }
    if !(achieved_quality.is_finite() && achieved_quality >= 0.0) {
        return Err(Error::Domain(format!(
            "achieved_quality {achieved_quality} must be finite and >= 0"
        )));
    }
    if n == 0 {
        return Err(Error::Domain("penalty exponent must be >= 1".into()));
    }
    let exponent =
        i32::try_from(n).map_err(|_| Error::Domain(format!("penalty exponent {n} too large")))?;
    Ok((achieved_quality / target_quality).powi(exponent))
}

#[inline]
pub fn vflops(sustained_flops: f64, penalty: f64) -> f64 {
    sustained_flops * penalty
}

pub fn time_to_quality(run: &RunRecord, spec: &BenchmarkSpec) -> TimeToQuality {
    if run.achieved_quality >= spec.target_quality {
        TimeToQuality::Reached(run.wall_clock_seconds)
    } else {
        TimeToQuality::Unreached
    }
}

/// Scores a run. Invalid runs still get numbers; `valid` and `violations`
/// say why they should not be ranked.
pub fn score_run(run: &RunRecord, spec: &BenchmarkSpec) -> Result<ScoreReport> {
    if run.benchmark_id != spec.id {
        return Err(Error::Domain(format!(
            "run {} is for benchmark {}, not {}",
            run.run_id, run.benchmark_id, spec.id
        )));
    }
    let penalty = penalty_coefficient(
        run.achieved_quality,
        spec.target_quality,
        spec.penalty_exponent,
    )?;
    let violations = validate_run(run, spec);
    Ok(ScoreReport {
        run_id: run.run_id.clone(),
        benchmark_id: run.benchmark_id.clone(),
        penalty_coefficient: penalty,
        vflops: vflops(run.sustained_flops, penalty),
        time_to_quality_seconds: time_to_quality(run, spec),
        valid: violations.is_empty(),
        violations,
        awarded: penalty > 1.0,
    })
}

/// Resolves the run's benchmark in `registry`, then scores it.
pub fn score_with_registry(run: &RunRecord, registry: &Registry) -> Result<ScoreReport> {
    score_run(run, registry.lookup(&run.benchmark_id)?)
}
