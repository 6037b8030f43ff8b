//! Per-frame appearance and motion descriptors.

mod external;
mod flow;
mod hog;
mod lpq;
mod regions;

pub use external::{ingest_external_features, EXTERNAL_FEATURE_DIM};
pub use flow::{farneback_flow, FlowField, FlowParams};
pub use hog::{hog_descriptor, HogParams};
pub use lpq::{chi_squared_distance, lpq_descriptor, LpqParams};
pub use regions::{extract_flow_regions, RegionLayout};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptorKind {
    Lpq,
    Hog,
    Flow,
    External,
}

/// Per-video T x D matrix: rows are frames, columns are descriptor
/// dimensions.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    kind: DescriptorKind,
}

impl FeatureMatrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>, kind: DescriptorKind) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "feature matrix {rows}x{cols} needs {} values, got {}",
                rows * cols,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite feature value".into()));
        }
        Ok(FeatureMatrix {
            rows,
            cols,
            data,
            kind,
        })
    }

    /// Stacks per-frame descriptor rows into a matrix.
    pub fn from_rows(rows: Vec<Vec<f64>>, kind: DescriptorKind) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Invalid("feature matrix needs at least one row".into()));
        }
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Dimension(format!(
                    "row {i} has {} values, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        FeatureMatrix::new(rows.len(), cols, data, kind)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn kind(&self) -> DescriptorKind {
        self.kind
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.data[r * self.cols + c]).collect()
    }
}
