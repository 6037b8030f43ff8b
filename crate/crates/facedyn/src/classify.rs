//! Linear soft-margin SVM: dual coordinate descent on the L1-loss dual
//! with a deterministic visiting order, plus feature standardization and
//! model persistence.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifest::SmileLabel;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    /// Hinge-loss weight C in `min 1/2 |w|^2 + C sum max(0, 1 - y f(x))`.
    pub c: f64,
    /// KKT violation tolerance for convergence.
    pub tol: f64,
    /// Maximum full passes over the training set.
    pub max_iter: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            c: 1.0,
            tol: 1e-3,
            max_iter: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) || !(self.tol > 0.0) {
            return Err(Error::Invalid("C and tol must be positive".into()));
        }
        Ok(())
    }
}

const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    pub version: u32,
    pub dim: usize,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_mean: Vec<f64>,
    pub feature_std: Vec<f64>,
    /// Dimensions whose training variance was zero; their std is stored
    /// as 1.
    pub zero_variance_dims: Vec<usize>,
    pub config: TrainConfig,
}

#[derive(Debug, Clone)]
pub struct TrainStats {
    /// Solver objective `1/2 |w|^2 - sum alpha` after each full pass;
    /// non-increasing for a convergent run.
    pub pass_objectives: Vec<f64>,
    pub converged: bool,
}

/// Per-dimension mean and population standard deviation. Zero-variance
/// dimensions are recorded and their std stored as 1.
pub fn standardize_fit(x: &[Vec<f64>]) -> Result<(Vec<f64>, Vec<f64>, Vec<usize>)> {
    let n = x.len();
    if n < 2 {
        return Err(Error::Invalid(format!(
            "standardization needs at least 2 samples, got {n}"
        )));
    }
    let d = x[0].len();
    let mut mean = vec![0.0; d];
    for row in x {
        if row.len() != d {
            return Err(Error::Dimension("ragged feature rows".into()));
        }
        for (m, &v) in mean.iter_mut().zip(row) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    let mut var = vec![0.0; d];
    for row in x {
        for ((v, &xv), &m) in var.iter_mut().zip(row).zip(&mean) {
            *v += (xv - m) * (xv - m);
        }
    }
    let mut std = Vec::with_capacity(d);
    let mut flagged = Vec::new();
    for (j, v) in var.iter().enumerate() {
        let s = (v / n as f64).sqrt();
        if s == 0.0 {
            flagged.push(j);
            std.push(1.0);
        } else {
            std.push(s);
        }
    }
    Ok((mean, std, flagged))
}

fn standardized(row: &[f64], mean: &[f64], std: &[f64]) -> Vec<f64> {
    row.iter()
        .zip(mean)
        .zip(std)
        .map(|((&x, &m), &s)| (x - m) / s)
        .collect()
}

/// Dual coordinate descent for the L2-regularized L1-loss SVM on
/// already-standardized data. The bias is handled as an augmented
/// constant-1 feature.
pub fn svm_train(x: &[Vec<f64>], y: &[f64], cfg: &TrainConfig) -> Result<LinearSvmModel> {
    Ok(svm_train_traced(x, y, cfg)?.0)
}

pub fn svm_train_traced(
    x: &[Vec<f64>],
    y: &[f64],
    cfg: &TrainConfig,
) -> Result<(LinearSvmModel, TrainStats)> {
    cfg.validate()?;
    let n = x.len();
    if n < 2 || y.len() != n {
        return Err(Error::Invalid(format!(
            "training needs >= 2 labeled samples, got {n} samples and {} labels",
            y.len()
        )));
    }
    if !(y.iter().any(|&l| l > 0.0) && y.iter().any(|&l| l < 0.0)) {
        return Err(Error::Invalid("training set contains a single class".into()));
    }
    let d = x[0].len();
    for row in x {
        if row.len() != d {
            return Err(Error::Dimension("ragged feature rows".into()));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite feature value".into()));
        }
    }

    // Augmented weight vector: w[0..d] plus bias at index d.
    let mut w = vec![0.0f64; d + 1];
    let mut alpha = vec![0.0f64; n];
    let q_diag: Vec<f64> = x
        .iter()
        .map(|row| row.iter().map(|v| v * v).sum::<f64>() + 1.0)
        .collect();

    let dot = |w: &[f64], row: &[f64]| -> f64 {
        let mut acc = w[d];
        for (wv, xv) in w[..d].iter().zip(row) {
            acc += wv * xv;
        }
        acc
    };

    let mut stats = TrainStats {
        pass_objectives: Vec::new(),
        converged: false,
    };
    for _pass in 0..cfg.max_iter {
        let mut max_violation = 0.0f64;
        for i in 0..n {
            let g = y[i] * dot(&w, &x[i]) - 1.0;
            // Projected gradient respecting the box constraint [0, C].
            let pg = if alpha[i] <= 0.0 {
                g.min(0.0)
            } else if alpha[i] >= cfg.c {
                g.max(0.0)
            } else {
                g
            };
            max_violation = max_violation.max(pg.abs());
            if pg.abs() > 1e-14 {
                let new_alpha = (alpha[i] - g / q_diag[i]).clamp(0.0, cfg.c);
                let delta = new_alpha - alpha[i];
                if delta != 0.0 {
                    for (wv, xv) in w[..d].iter_mut().zip(&x[i]) {
                        *wv += delta * y[i] * xv;
                    }
                    w[d] += delta * y[i];
                    alpha[i] = new_alpha;
                }
            }
        }
        let w_norm2: f64 = w.iter().map(|v| v * v).sum();
        let objective = 0.5 * w_norm2 - alpha.iter().sum::<f64>();
        stats.pass_objectives.push(objective);
        if max_violation < cfg.tol {
            stats.converged = true;
            break;
        }
    }

    let model = LinearSvmModel {
        version: MODEL_VERSION,
        dim: d,
        weights: w[..d].to_vec(),
        bias: w[d],
        feature_mean: vec![0.0; d],
        feature_std: vec![1.0; d],
        zero_variance_dims: Vec::new(),
        config: *cfg,
    };
    Ok((model, stats))
}

/// Fits standardization on the raw features, trains on the standardized
/// data, and stores the statistics in the model.
pub fn fit(x: &[Vec<f64>], y: &[f64], cfg: &TrainConfig) -> Result<LinearSvmModel> {
    let (mean, std, flagged) = standardize_fit(x)?;
    let xs: Vec<Vec<f64>> = x.iter().map(|row| standardized(row, &mean, &std)).collect();
    let mut model = svm_train(&xs, y, cfg)?;
    model.feature_mean = mean;
    model.feature_std = std;
    model.zero_variance_dims = flagged;
    Ok(model)
}

/// Decision score and label. Score >= 0 (including exact ties) maps to
/// posed.
pub fn svm_predict(model: &LinearSvmModel, x: &[f64]) -> Result<(SmileLabel, f64)> {
    if x.len() != model.dim {
        return Err(Error::Dimension(format!(
            "sample has {} dims, model expects {}",
            x.len(),
            model.dim
        )));
    }
    let mut score = model.bias;
    for i in 0..model.dim {
        score += model.weights[i] * (x[i] - model.feature_mean[i]) / model.feature_std[i];
    }
    let label = if score >= 0.0 {
        SmileLabel::Posed
    } else {
        SmileLabel::Spontaneous
    };
    Ok((label, score))
}

pub fn save_model(model: &LinearSvmModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string(model)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<LinearSvmModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let model: LinearSvmModel =
        serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    if model.version != MODEL_VERSION {
        return Err(Error::format(
            path,
            format!("model version {} unsupported, expected {MODEL_VERSION}", model.version),
        ));
    }
    if model.weights.len() != model.dim
        || model.feature_mean.len() != model.dim
        || model.feature_std.len() != model.dim
    {
        return Err(Error::format(path, "model field lengths disagree with dim"));
    }
    if model.feature_std.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::format(path, "feature_std entries must be positive"));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn standardize_examples() {
        let (mean, std, flagged) = standardize_fit(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(mean, vec![1.0]);
        assert_eq!(std, vec![1.0]);
        assert!(flagged.is_empty());

        let (mean, std, _) = standardize_fit(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(mean, vec![2.0, 3.0]);
        assert_eq!(std, vec![1.0, 1.0]);

        let (_, std, flagged) = standardize_fit(&[vec![5.0], vec![5.0], vec![5.0]]).unwrap();
        assert_eq!(std, vec![1.0]);
        assert_eq!(flagged, vec![0]);

        assert!(standardize_fit(&[vec![1.0]]).is_err());
    }

    #[test]
    fn symmetric_pair() {
        let x = vec![vec![1.0, 0.0], vec![-1.0, 0.0]];
        let y = vec![1.0, -1.0];
        let model = svm_train(&x, &y, &TrainConfig::default()).unwrap();
        for (row, label) in x.iter().zip([SmileLabel::Posed, SmileLabel::Spontaneous]) {
            assert_eq!(svm_predict(&model, row).unwrap().0, label);
        }
        // Weight direction (1, 0) within 1e-3 angle.
        let norm = (model.weights[0].powi(2) + model.weights[1].powi(2)).sqrt();
        let angle = (model.weights[1] / norm).atan2(model.weights[0] / norm).abs();
        assert!(angle < 1e-3, "angle {angle}");
    }

    fn four_point_fixture() -> (Vec<Vec<f64>>, Vec<f64>) {
        (
            vec![
                vec![1.0, 0.1],
                vec![1.0, -0.1],
                vec![-1.0, 0.1],
                vec![-1.0, -0.1],
            ],
            vec![1.0, 1.0, -1.0, -1.0],
        )
    }

    #[test]
    fn four_point_max_margin() {
        let (x, y) = four_point_fixture();
        let cfg = TrainConfig::default();
        let model = svm_train(&x, &y, &cfg).unwrap();
        // Closed-form max margin: w = (1, 0), b = 0.
        assert!((model.weights[0] - 1.0).abs() < cfg.tol * 10.0, "{:?}", model.weights);
        assert!(model.weights[1].abs() < cfg.tol * 10.0);
        assert!(model.bias.abs() < cfg.tol * 10.0);
        for (row, &label) in x.iter().zip(&y) {
            let (_, score) = svm_predict(&model, row).unwrap();
            assert_eq!(score >= 0.0, label > 0.0);
        }
    }

    #[test]
    fn duplicated_dataset_same_decision() {
        let (x, y) = four_point_fixture();
        let cfg = TrainConfig {
            tol: 1e-8,
            ..TrainConfig::default()
        };
        let m1 = svm_train(&x, &y, &cfg).unwrap();
        let mut x2 = x.clone();
        x2.extend(x.iter().cloned());
        let mut y2 = y.clone();
        y2.extend(y.iter().copied());
        let m2 = svm_train(&x2, &y2, &cfg).unwrap();
        for probe in [[0.3, -0.5], [-0.2, 0.9], [1.5, 0.0]] {
            let s1 = svm_predict(&m1, &probe).unwrap().1;
            let s2 = svm_predict(&m2, &probe).unwrap().1;
            assert!((s1 - s2).abs() < 1e-6, "{s1} vs {s2}");
        }
    }

    #[test]
    fn objective_monotone_per_pass() {
        let x: Vec<Vec<f64>> = (0..40)
            .map(|i| {
                let t = i as f64 * 0.37;
                vec![t.sin(), t.cos(), (i % 7) as f64 / 3.0 - 1.0]
            })
            .collect();
        let y: Vec<f64> = (0..40).map(|i| if i % 3 == 0 { 1.0 } else { -1.0 }).collect();
        let (_, stats) = svm_train_traced(&x, &y, &TrainConfig::default()).unwrap();
        for pair in stats.pass_objectives.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-12, "{} -> {}", pair[0], pair[1]);
        }
    }

    #[test]
    fn single_class_rejected() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(svm_train(&x, &[1.0, 1.0], &TrainConfig::default()).is_err());
    }

    #[test]
    fn tie_score_maps_to_posed() {
        let model = LinearSvmModel {
            version: MODEL_VERSION,
            dim: 1,
            weights: vec![1.0],
            bias: 0.0,
            feature_mean: vec![0.0],
            feature_std: vec![1.0],
            zero_variance_dims: vec![],
            config: TrainConfig::default(),
        };
        let (label, score) = svm_predict(&model, &[0.0]).unwrap();
        assert_eq!(score, 0.0);
        assert_eq!(label, SmileLabel::Posed);
    }

    #[test]
    fn negated_model_flips_labels() {
        let (x, y) = four_point_fixture();
        let model = svm_train(&x, &y, &TrainConfig::default()).unwrap();
        let mut neg = model.clone();
        neg.weights.iter_mut().for_each(|w| *w = -*w);
        neg.bias = -neg.bias;
        for row in &x {
            let a = svm_predict(&model, row).unwrap().1;
            let b = svm_predict(&neg, row).unwrap().1;
            // Scores negate; labels flip except exact ties.
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn model_roundtrip_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let dim = 25_600;
        let model = LinearSvmModel {
            version: MODEL_VERSION,
            dim,
            weights: (0..dim).map(|i| (i as f64 * 0.731).sin() / 3.0).collect(),
            bias: -0.123456789012345,
            feature_mean: (0..dim).map(|i| i as f64 * 1e-3).collect(),
            feature_std: (0..dim).map(|i| 1.0 + (i % 13) as f64).collect(),
            zero_variance_dims: vec![17, 42],
            config: TrainConfig::default(),
        };
        save_model(&model, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back, model);
    }

    #[test]
    fn corrupt_model_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        std::fs::write(&path, "{\"not\": \"a model\"}").unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn version_mismatch_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");
        let mut model = svm_train(
            &[vec![1.0], vec![-1.0]],
            &[1.0, -1.0],
            &TrainConfig::default(),
        )
        .unwrap();
        model.version = 99;
        save_model(&model, &path).unwrap();
        assert!(load_model(&path).is_err());
    }

    #[test]
    fn standardization_folds_into_model() {
        // Training on raw data via fit() and on pre-standardized data via
        // svm_train() must label a held-out set identically.
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let t = i as f64;
                vec![100.0 + t * (if i % 2 == 0 { 3.0 } else { -3.0 }), 0.01 * t]
            })
            .collect();
        let y: Vec<f64> = (0..30).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let folded = fit(&x, &y, &TrainConfig::default()).unwrap();
        let (mean, std, _) = standardize_fit(&x).unwrap();
        let xs: Vec<Vec<f64>> = x.iter().map(|r| standardized(r, &mean, &std)).collect();
        let plain = svm_train(&xs, &y, &TrainConfig::default()).unwrap();
        for i in 0..30 {
            let a = svm_predict(&folded, &x[i]).unwrap().0;
            let b = svm_predict(&plain, &xs[i]).unwrap().0;
            assert_eq!(a, b, "sample {i}");
        }
    }

    #[test]
    fn feature_permutation_invariance() {
        let (x, y) = four_point_fixture();
        let perm = |row: &[f64]| vec![row[1], row[0]];
        let xp: Vec<Vec<f64>> = x.iter().map(|r| perm(r)).collect();
        let m = svm_train(&x, &y, &TrainConfig::default()).unwrap();
        let mp = svm_train(&xp, &y, &TrainConfig::default()).unwrap();
        for row in &x {
            let a = svm_predict(&m, row).unwrap().0;
            let b = svm_predict(&mp, &perm(row)).unwrap().0;
            assert_eq!(a, b);
        }
    }
}
