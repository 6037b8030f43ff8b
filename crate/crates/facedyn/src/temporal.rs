//! Temporal normalization: per-column DCT over the frame axis, cropped or
//! zero-padded to a fixed coefficient count, then flattened.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TemporalConfig {
    /// Number of cosine coefficients kept per descriptor dimension.
    pub target_len: usize,
}

impl Default for TemporalConfig {
    fn default() -> Self {
        TemporalConfig { target_len: 100 }
    }
}

impl TemporalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_len == 0 {
            return Err(Error::Invalid("target_len must be >= 1".into()));
        }
        Ok(())
    }
}

/// Orthonormal DCT-II:
/// `C[k] = s(k) * sum_t x[t] cos(pi (2t+1) k / (2T))`,
/// `s(0) = sqrt(1/T)`, `s(k>0) = sqrt(2/T)`.
pub fn dct_time(series: &[f64]) -> Result<Vec<f64>> {
    let t_len = series.len();
    if t_len == 0 {
        return Err(Error::Invalid("DCT of empty series".into()));
    }
    let mut out = Vec::with_capacity(t_len);
    let norm0 = (1.0 / t_len as f64).sqrt();
    let norm = (2.0 / t_len as f64).sqrt();
    for k in 0..t_len {
        let mut acc = 0.0;
        for (t, &x) in series.iter().enumerate() {
            acc += x * (std::f64::consts::PI * (2 * t + 1) as f64 * k as f64
                / (2.0 * t_len as f64))
                .cos();
        }
        out.push(if k == 0 { norm0 * acc } else { norm * acc });
    }
    Ok(out)
}

/// Inverse of [`dct_time`] (orthonormal DCT-III).
pub fn idct_time(coeffs: &[f64]) -> Result<Vec<f64>> {
    let t_len = coeffs.len();
    if t_len == 0 {
        return Err(Error::Invalid("inverse DCT of empty series".into()));
    }
    let norm0 = (1.0 / t_len as f64).sqrt();
    let norm = (2.0 / t_len as f64).sqrt();
    let mut out = Vec::with_capacity(t_len);
    for t in 0..t_len {
        let mut acc = norm0 * coeffs[0];
        for (k, &c) in coeffs.iter().enumerate().skip(1) {
            acc += norm
                * c
                * (std::f64::consts::PI * (2 * t + 1) as f64 * k as f64 / (2.0 * t_len as f64))
                    .cos();
        }
        out.push(acc);
    }
    Ok(out)
}

/// Per-column DCT over time, cropped to the lowest `target_len`
/// coefficients or zero-padded up to it. Output is `target_len x D`.
pub fn normalize_length(matrix: &FeatureMatrix, cfg: &TemporalConfig) -> Result<FeatureMatrix> {
    cfg.validate()?;
    let t_len = matrix.rows();
    let d = matrix.cols();
    let l = cfg.target_len;
    let mut data = vec![0.0; l * d];
    for c in 0..d {
        let coeffs = dct_time(&matrix.column(c))?;
        for (k, &v) in coeffs.iter().take(l.min(t_len)).enumerate() {
            data[k * d + c] = v;
        }
    }
    FeatureMatrix::new(l, d, data, matrix.kind())
}

/// Column-major flatten: all `L` coefficients of dimension 0, then
/// dimension 1, and so on.
pub fn flatten(matrix: &FeatureMatrix) -> Vec<f64> {
    let mut out = Vec::with_capacity(matrix.rows() * matrix.cols());
    for c in 0..matrix.cols() {
        out.extend(matrix.column(c));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::DescriptorKind;

    /// Direct formula evaluation, kept independent of the implementation.
    fn dct_oracle(series: &[f64]) -> Vec<f64> {
        let t_len = series.len() as f64;
        (0..series.len())
            .map(|k| {
                let s = if k == 0 {
                    (1.0 / t_len).sqrt()
                } else {
                    (2.0 / t_len).sqrt()
                };
                s * series
                    .iter()
                    .enumerate()
                    .map(|(t, &x)| {
                        x * (std::f64::consts::PI * (2.0 * t as f64 + 1.0) * k as f64
                            / (2.0 * t_len))
                            .cos()
                    })
                    .sum::<f64>()
            })
            .collect()
    }

    #[test]
    fn constant_series_concentrates_in_dc() {
        let c = 3.7;
        let t = 25;
        let coeffs = dct_time(&vec![c; t]).unwrap();
        assert!((coeffs[0] - c * (t as f64).sqrt()).abs() < 1e-9);
        assert!(coeffs[1..].iter().all(|&v| v.abs() < 1e-9));
    }

    #[test]
    fn length_one_is_identity() {
        assert_eq!(dct_time(&[5.0]).unwrap(), vec![5.0]);
    }

    #[test]
    fn impulse_matches_direct_formula() {
        let x = [1.0, 0.0, 0.0, 0.0];
        let coeffs = dct_time(&x).unwrap();
        for (k, &c) in coeffs.iter().enumerate() {
            let s = if k == 0 { 0.5 } else { (2.0f64 / 4.0).sqrt() };
            let expected = s * (std::f64::consts::PI * k as f64 / 8.0).cos();
            assert!((c - expected).abs() < 1e-12, "k={k}: {c} vs {expected}");
        }
    }

    #[test]
    fn energy_preserved_when_lengths_match() {
        let series: Vec<f64> = (0..100).map(|t| ((t * 37) % 19) as f64 / 7.0 - 1.0).collect();
        let coeffs = dct_time(&series).unwrap();
        let e_in: f64 = series.iter().map(|v| v * v).sum();
        let e_out: f64 = coeffs.iter().map(|v| v * v).sum();
        assert!((e_in - e_out).abs() < 1e-9, "{e_in} vs {e_out}");
    }

    #[test]
    fn inverse_recovers_series() {
        let series: Vec<f64> = (0..64).map(|t| (t as f64 * 0.3).sin()).collect();
        let back = idct_time(&dct_time(&series).unwrap()).unwrap();
        for (a, b) in series.iter().zip(&back) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    fn matrix(t: usize, d: usize) -> FeatureMatrix {
        let data: Vec<f64> = (0..t * d).map(|i| ((i * 13) % 29) as f64 / 5.0).collect();
        FeatureMatrix::new(t, d, data, DescriptorKind::Lpq).unwrap()
    }

    #[test]
    fn exact_length_is_pure_dct() {
        let m = matrix(100, 3);
        let out = normalize_length(&m, &TemporalConfig { target_len: 100 }).unwrap();
        for c in 0..3 {
            let expected = dct_oracle(&m.column(c));
            let got = out.column(c);
            for (a, b) in expected.iter().zip(&got) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn short_series_zero_padded() {
        let m = matrix(80, 2);
        let out = normalize_length(&m, &TemporalConfig { target_len: 100 }).unwrap();
        assert_eq!(out.rows(), 100);
        for k in 80..100 {
            assert_eq!(out.row(k), &[0.0, 0.0]);
        }
    }

    #[test]
    fn long_series_cropped_to_lowest_coefficients() {
        let m = matrix(500, 2);
        let out = normalize_length(&m, &TemporalConfig { target_len: 100 }).unwrap();
        assert_eq!(out.rows(), 100);
        for c in 0..2 {
            let full = dct_oracle(&m.column(c));
            let got = out.column(c);
            for k in 0..100 {
                assert!((full[k] - got[k]).abs() < 1e-9, "col {c} k {k}");
            }
        }
    }

    #[test]
    fn shape_idempotent() {
        let m = matrix(80, 2);
        let cfg = TemporalConfig { target_len: 50 };
        let once = normalize_length(&m, &cfg).unwrap();
        let twice = normalize_length(&once, &cfg).unwrap();
        assert_eq!((once.rows(), once.cols()), (twice.rows(), twice.cols()));
    }

    #[test]
    fn flatten_is_column_major() {
        let m = FeatureMatrix::new(2, 2, vec![1.0, 2.0, 3.0, 4.0], DescriptorKind::Hog).unwrap();
        assert_eq!(flatten(&m), vec![1.0, 3.0, 2.0, 4.0]);
        let single = FeatureMatrix::new(1, 3, vec![7.0, 8.0, 9.0], DescriptorKind::Hog).unwrap();
        assert_eq!(flatten(&single), vec![7.0, 8.0, 9.0]);
    }

    #[test]
    fn lpq_pipeline_vector_length() {
        let m = matrix(100, 256);
        let out = normalize_length(&m, &TemporalConfig::default()).unwrap();
        assert_eq!(flatten(&out).len(), 25_600);
    }
}
