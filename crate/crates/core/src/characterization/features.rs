use std::collections::HashSet;

use serde::Serialize;

use crate::error::{Error, Result};

/// One row of features per workload.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureMatrix {
    workload_ids: Vec<String>,
    feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    standardized: bool,
}

impl FeatureMatrix {
    /// Workload ids must be unique: they fix the canonical row order used
    /// for seeding.
    pub fn new(
        workload_ids: Vec<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if workload_ids.len() != rows.len() {
            return Err(Error::Domain(format!(
                "{} workload ids for {} rows",
                workload_ids.len(),
                rows.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = workload_ids.iter().find(|id| !seen.insert(id.as_str())) {
            return Err(Error::Domain(format!("duplicate workload id `{dup}`")));
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != feature_names.len() {
                return Err(Error::Domain(format!(
                    "row {r} has {} values for {} features",
                    row.len(),
                    feature_names.len()
                )));
            }
            if let Some(c) = row.iter().position(|x| !x.is_finite()) {
                return Err(Error::NonFinite { row: r, column: c });
            }
        }
        Ok(FeatureMatrix {
            workload_ids,
            feature_names,
            rows,
            standardized: false,
        })
    }

    /// Builds a matrix with generated ids `p0, p1, ...`, handy for synthetic data.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let ids = (0..rows.len()).map(|i| format!("p{i:04}")).collect();
        let names = (0..width).map(|j| format!("f{j}")).collect();
        FeatureMatrix::new(ids, names, rows)
    }

    pub fn workload_ids(&self) -> &[String] {
        &self.workload_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_standardized(&self) -> bool {
        self.standardized
    }

    /// Marks an already-scaled matrix as standardized without touching it.
    pub fn assume_standardized(mut self) -> Self {
        self.standardized = true;
        self
    }

    /// Z-scores every column with the sample standard deviation. Constant
    /// columns become zeros.
    pub fn standardize(&self) -> Result<FeatureMatrix> {
        if self.standardized {
            return Err(Error::AlreadyStandardized);
        }
        let n = self.rows.len();
        if n < 2 {
            return Err(Error::TooFewSamples { needed: 2, got: n });
        }
        let mut rows = self.rows.clone();
        for c in 0..self.n_features() {
            let first = self.rows[0][c];
            if self.rows.iter().all(|r| r[c] == first) {
                rows.iter_mut().for_each(|r| r[c] = 0.0);
                continue;
            }
            let mean = self.rows.iter().map(|r| r[c]).sum::<f64>() / n as f64;
            let var = self.rows.iter().map(|r| (r[c] - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let sd = var.sqrt();
            for (out, src) in rows.iter_mut().zip(&self.rows) {
                out[c] = (src[c] - mean) / sd;
            }
        }
        Ok(FeatureMatrix {
            workload_ids: self.workload_ids.clone(),
            feature_names: self.feature_names.clone(),
            rows,
            standardized: true,
        })
    }

    /// Row indices sorted by workload id.
    pub(crate) fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.rows.len()).collect();
        order.sort_by(|&a, &b| self.workload_ids[a].cmp(&self.workload_ids[b]));
        order
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}
