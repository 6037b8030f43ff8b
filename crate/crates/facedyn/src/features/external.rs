//! Ingestion of precomputed per-frame feature vectors (e.g. deep-CNN
//! activations) from FDM1 files.

use std::path::Path;

use crate::error::{Error, Result};
use crate::io::read_feature_matrix;

use super::{DescriptorKind, FeatureMatrix};

pub const EXTERNAL_FEATURE_DIM: usize = 4096;

/// Reads an FDM1 file of per-frame vectors. Rows are expected to be
/// L2-normalized; deviations beyond 1e-3 are logged as warnings, not
/// rejected.
pub fn ingest_external_features(path: impl AsRef<Path>, expected_dim: usize) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let matrix = read_feature_matrix(path, DescriptorKind::External)?;
    if matrix.cols() != expected_dim {
        return Err(Error::Dimension(format!(
            "external features in {} have {} columns, expected {expected_dim}",
            path.display(),
            matrix.cols()
        )));
    }
    for r in 0..matrix.rows() {
        let norm: f64 = matrix.row(r).iter().map(|v| v * v).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-3 {
            log::warn!(
                "{}: row {r} has L2 norm {norm:.4}, expected 1",
                path.display()
            );
        }
    }
    Ok(matrix)
}
