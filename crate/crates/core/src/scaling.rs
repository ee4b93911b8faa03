//! Measured scaling curves and an analytical all-reduce cost model.
//!
//! The model charges each training step its compute time plus the time to
//! move the per-device all-reduce volume over the slowest link in use, with
//! no compute/communication overlap and no latency term. It is meant to show
//! why a large gradient payload scales worse, not to predict absolute
//! numbers.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::RunRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingPoint {
    pub scale: u32,
    pub sustained_flops: f64,
    pub speedup: f64,
    pub efficiency: f64,
}

impl ScalingPoint {
    pub fn is_superlinear(&self) -> bool {
        self.efficiency > 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingCurve {
    pub benchmark_id: String,
    pub baseline_scale: u32,
    /// Sorted by scale.
    pub points: Vec<ScalingPoint>,
}

impl ScalingCurve {
    pub fn superlinear_points(&self) -> impl Iterator<Item = &ScalingPoint> {
        self.points.iter().filter(|p| p.is_superlinear())
    }

    /// `scale,flops,speedup,efficiency` with a header row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scale,flops,speedup,efficiency\n");
        for p in &self.points {
            writeln!(
                out,
                "{},{},{},{}",
                p.scale, p.sustained_flops, p.speedup, p.efficiency
            )
            .expect("writing to a String cannot fail");
        }
        out
    }
}

/// Speedup and parallel efficiency relative to the run at `baseline_scale`.
///
/// All runs must share benchmark, system, precision and compression setting.
pub fn scaling_curve(runs: &[RunRecord], baseline_scale: u32) -> Result<ScalingCurve> {
    if let Some(first) = runs.first() {
        for run in &runs[1..] {
            let mismatch = |what, a: String, b: String| Error::MixedRuns {
                what,
                first: a,
                second: b,
            };
            if run.benchmark_id != first.benchmark_id {
                return Err(mismatch(
                    "benchmarks",
                    first.benchmark_id.clone(),
                    run.benchmark_id.clone(),
                ));
            }
            if run.system_name != first.system_name {
                return Err(mismatch(
                    "systems",
                    first.system_name.clone(),
                    run.system_name.clone(),
                ));
            }
            if run.precision_mode != first.precision_mode {
                return Err(mismatch(
                    "precision modes",
                    first.precision_mode.to_string(),
                    run.precision_mode.to_string(),
                ));
            }
            if run.comm_compression != first.comm_compression {
                return Err(mismatch(
                    "compression settings",
                    first.comm_compression.to_string(),
                    run.comm_compression.to_string(),
                ));
            }
        }
    }

    let mut by_scale: BTreeMap<u32, f64> = BTreeMap::new();
    for run in runs {
        if by_scale
            .insert(run.accelerator_count, run.sustained_flops)
            .is_some()
        {
            return Err(Error::DuplicateScale(run.accelerator_count));
        }
    }
    let base_flops = *by_scale
        .get(&baseline_scale)
        .ok_or(Error::MissingBaseline(baseline_scale))?;
    if !(base_flops.is_finite() && base_flops > 0.0) || baseline_scale == 0 {
        return Err(Error::Domain(format!(
            "baseline run at scale {baseline_scale} must have positive scale and throughput"
        )));
    }

    let points = by_scale
        .into_iter()
        .map(|(scale, flops)| {
            let speedup = flops / base_flops;
            let ideal = f64::from(scale) / f64::from(baseline_scale);
            ScalingPoint {
                scale,
                sustained_flops: flops,
                speedup,
                efficiency: speedup / ideal,
            }
        })
        .collect();
    Ok(ScalingCurve {
        benchmark_id: runs[0].benchmark_id.clone(),
        baseline_scale,
        points,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Topology {
    Ring,
    /// Charged the ring volume; latency differences are not modeled.
    DoubleBinaryTree,
}

/// Bytes each device sends (and receives) in one all-reduce:
/// `2 (p - 1) / p * model_bytes`.
pub fn allreduce_bytes_per_device(model_bytes: f64, p: u32, topology: Topology) -> f64 {
    if p <= 1 {
        return 0.0;
    }
    match topology {
        Topology::Ring | Topology::DoubleBinaryTree => {
            let p = f64::from(p);
            2.0 * (p - 1.0) / p * model_bytes
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "CommModelRepr", into = "CommModelRepr")]
pub struct CommModel {
    model_bytes: f64,
    per_device_compute_seconds: f64,
    intra_node_bandwidth: f64,
    inter_node_bandwidth: f64,
    devices_per_node: u32,
    compression: bool,
    topology: Topology,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CommModelRepr {
    model_bytes: f64,
    per_device_compute_seconds: f64,
    intra_node_bandwidth: f64,
    inter_node_bandwidth: f64,
    devices_per_node: u32,
    #[serde(default)]
    compression: bool,
    #[serde(default = "default_topology")]
    topology: Topology,
}

fn default_topology() -> Topology {
    Topology::Ring
}

impl TryFrom<CommModelRepr> for CommModel {
    type Error = Error;

    fn try_from(r: CommModelRepr) -> Result<Self> {
        CommModel::new(
            r.model_bytes,
            r.per_device_compute_seconds,
            r.intra_node_bandwidth,
            r.inter_node_bandwidth,
            r.devices_per_node,
        )
        .map(|m| m.with_compression(r.compression).with_topology(r.topology))
    }
}

impl From<CommModel> for CommModelRepr {
    fn from(m: CommModel) -> Self {
        CommModelRepr {
            model_bytes: m.model_bytes,
            per_device_compute_seconds: m.per_device_compute_seconds,
            intra_node_bandwidth: m.intra_node_bandwidth,
            inter_node_bandwidth: m.inter_node_bandwidth,
            devices_per_node: m.devices_per_node,
            compression: m.compression,
            topology: m.topology,
        }
    }
}

impl CommModel {
    /// Bandwidths in bytes/s. Ring topology and no compression by default.
    pub fn new(
        model_bytes: f64,
        per_device_compute_seconds: f64,
        intra_node_bandwidth: f64,
        inter_node_bandwidth: f64,
        devices_per_node: u32,
    ) -> Result<Self> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::Domain(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        if !(model_bytes.is_finite() && model_bytes >= 0.0) {
            return Err(Error::Domain(format!(
                "model_bytes must be finite and >= 0, got {model_bytes}"
            )));
        }
        positive("per_device_compute_seconds", per_device_compute_seconds)?;
        positive("intra_node_bandwidth", intra_node_bandwidth)?;
        positive("inter_node_bandwidth", inter_node_bandwidth)?;
        if devices_per_node == 0 {
            return Err(Error::Domain("devices_per_node must be >= 1".into()));
        }
        Ok(CommModel {
            model_bytes,
            per_device_compute_seconds,
            intra_node_bandwidth,
            inter_node_bandwidth,
            devices_per_node,
            compression: false,
            topology: Topology::Ring,
        })
    }

    /// Compression halves the bytes on the wire.
    pub fn with_compression(mut self, compression: bool) -> Self {
        self.compression = compression;
        self
    }

    pub fn with_topology(mut self, topology: Topology) -> Self {
        self.topology = topology;
        self
    }

    pub fn model_bytes(&self) -> f64 {
        self.model_bytes
    }

    pub fn compression(&self) -> bool {
        self.compression
    }

    pub fn devices_per_node(&self) -> u32 {
        self.devices_per_node
    }

    pub fn comm_bytes(&self, p: u32) -> f64 {
        let bytes = allreduce_bytes_per_device(self.model_bytes, p, self.topology);
        if self.compression {
            bytes / 2.0
        } else {
            bytes
        }
    }

    /// Intra-node links while the job fits on one node, inter-node beyond.
    pub fn bandwidth(&self, p: u32) -> f64 {
        if p <= self.devices_per_node {
            self.intra_node_bandwidth
        } else {
            self.inter_node_bandwidth
        }
    }

    pub fn predict(&self, p: u32) -> Prediction {
        let bytes = self.comm_bytes(p);
        let comm_seconds = bytes / self.bandwidth(p);
        let step_seconds = self.per_device_compute_seconds + comm_seconds;
        Prediction {
            scale: p,
            bytes_per_device: bytes,
            comm_seconds,
            step_seconds,
            efficiency: self.per_device_compute_seconds / step_seconds,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scale: u32,
    pub bytes_per_device: f64,
    pub comm_seconds: f64,
    pub step_seconds: f64,
    pub efficiency: f64,
}

/// Compute share of a step, in `(0, 1]`.
pub fn predict_efficiency(model: &CommModel, p: u32) -> f64 {
    model.predict(p).efficiency
}

pub fn predictions_to_csv(predictions: &[Prediction]) -> String {
    let mut out = String::from("scale,bytes_per_device,comm_seconds,step_seconds,efficiency\n");
    for p in predictions {
        writeln!(
            out,
            "{},{},{},{},{}",
            p.scale, p.bytes_per_device, p.comm_seconds, p.step_seconds, p.efficiency
        )
        .expect("writing to a String cannot fail");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::PrecisionMode;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn runs(points: &[(u32, f64)]) -> Vec<RunRecord> {
        points
            .iter()
            .map(|&(p, f)| RunRecord {
                run_id: format!("r{p}"),
                benchmark_id: "image_classification".into(),
                system_name: "cluster".into(),
                accelerator_count: p,
                precision_mode: PrecisionMode::Fp32,
                comm_compression: false,
                sustained_flops: f,
                achieved_quality: 0.763,
                epochs_run: 90,
                wall_clock_seconds: 1.0,
                seed: None,
            })
            .collect()
    }

    #[test]
    fn efficiency_examples() {
        let c = scaling_curve(&runs(&[(16, 182e12), (8, 100e12)]), 8).unwrap();
        assert_eq!(c.points[0].scale, 8);
        assert_eq!(c.points[0].efficiency, 1.0);
        assert_abs_diff_eq!(c.points[1].efficiency, 0.91, epsilon = 1e-12);

        let c = scaling_curve(&runs(&[(8, 3e13), (64, 24e13)]), 8).unwrap();
        assert_eq!(c.points[1].efficiency, 1.0);

        let c = scaling_curve(&runs(&[(8, 60.74e12), (64, 345e12)]), 8).unwrap();
        assert_abs_diff_eq!(c.points[1].efficiency, 0.71, epsilon = 0.005);
    }

    #[test]
    fn superlinear_is_reported_not_clamped() {
        let c = scaling_curve(&runs(&[(8, 1e12), (16, 2.2e12)]), 8).unwrap();
        assert!(c.points[1].efficiency > 1.0);
        assert_eq!(c.superlinear_points().count(), 1);
    }

    #[test]
    fn curve_errors() {
        assert!(matches!(
            scaling_curve(&runs(&[(16, 1e12)]), 8),
            Err(Error::MissingBaseline(8))
        ));
        assert!(matches!(
            scaling_curve(&runs(&[(8, 1e12), (8, 2e12)]), 8),
            Err(Error::DuplicateScale(8))
        ));
        let mut mixed = runs(&[(8, 1e12), (16, 2e12)]);
        mixed[1].precision_mode = PrecisionMode::Mixed;
        assert!(matches!(
            scaling_curve(&mixed, 8),
            Err(Error::MixedRuns { .. })
        ));
    }

    #[test]
    fn csv_layout() {
        let c = scaling_curve(&runs(&[(8, 1e12), (16, 2e12)]), 8).unwrap();
        assert_eq!(
            c.to_csv(),
            "scale,flops,speedup,efficiency\n8,1000000000000,1,1\n16,2000000000000,2,1\n"
        );
    }

    #[test]
    fn ring_volume() {
        assert_eq!(allreduce_bytes_per_device(5e8, 1, Topology::Ring), 0.0);
        assert_eq!(allreduce_bytes_per_device(100e6, 2, Topology::Ring), 100e6);
        let m = 1e9;
        let far = allreduce_bytes_per_device(m, 1 << 20, Topology::Ring);
        assert!(far < 2.0 * m && 2.0 * m - far < 1e-5 * m);
        assert_eq!(
            allreduce_bytes_per_device(m, 8, Topology::DoubleBinaryTree),
            allreduce_bytes_per_device(m, 8, Topology::Ring)
        );
    }

    #[test]
    fn prediction_examples() {
        let m = CommModel::new(1e8, 1.0, 1e10, 1e9, 8).unwrap();
        assert_eq!(predict_efficiency(&m, 1), 1.0);
        // 2 devices: 1e8 bytes over 1e8 B/s -> one second of comm.
        let half = CommModel::new(1e8, 1.0, 1e8, 1e8, 8).unwrap();
        assert_eq!(predict_efficiency(&half, 2), 0.5);
        assert!(CommModel::new(1.0, 1.0, 0.0, 1.0, 8).is_err());
        assert!(CommModel::new(1.0, 1.0, 1.0, 1.0, 0).is_err());
    }

    #[test]
    fn model_json_is_validated() {
        let ok = r#"{"model_bytes":1e8,"per_device_compute_seconds":0.5,"intra_node_bandwidth":1e11,"inter_node_bandwidth":1.25e9,"devices_per_node":8,"topology":"double_binary_tree"}"#;
        let m: CommModel = serde_json::from_str(ok).unwrap();
        assert!(!m.compression());
        let bad = ok.replace("1.25e9", "-1");
        assert!(serde_json::from_str::<CommModel>(&bad).is_err());
    }

    fn arb_model() -> impl Strategy<Value = CommModel> {
        (
            1e3f64..1e10,
            1e-3f64..10.0,
            1e8f64..1e12,
            1e7f64..1e11,
            1u32..17,
        )
            .prop_map(|(bytes, compute, intra, inter, dpn)| {
                CommModel::new(bytes, compute, intra, inter, dpn).unwrap()
            })
    }

    proptest! {
        #[test]
        fn compression_helps(model in arb_model(), p in 1u32..512) {
            let plain = predict_efficiency(&model.clone().with_compression(false), p);
            let packed = predict_efficiency(&model.with_compression(true), p);
            if p > 1 {
                prop_assert!(packed > plain);
            } else {
                prop_assert_eq!(packed, plain);
            }
        }

        #[test]
        fn efficiency_monotone_in_bytes_and_bandwidth(model in arb_model(), p in 2u32..512, factor in 1.0f64..100.0) {
            let base = predict_efficiency(&model, p);
            let r: CommModelRepr = model.into();
            let heavier = CommModel::new(r.model_bytes * factor, r.per_device_compute_seconds, r.intra_node_bandwidth, r.inter_node_bandwidth, r.devices_per_node).unwrap();
            let faster = CommModel::new(r.model_bytes, r.per_device_compute_seconds, r.intra_node_bandwidth * factor, r.inter_node_bandwidth * factor, r.devices_per_node).unwrap();
            prop_assert!(predict_efficiency(&heavier, p) <= base);
            prop_assert!(predict_efficiency(&faster, p) >= base);
            prop_assert!(base > 0.0 && base <= 1.0);
        }
    }
}
