//! 10-fold cross-validation protocol, confusion-matrix accounting, and
//! report emission.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classify::{fit, svm_predict, TrainConfig};
use crate::error::{Error, Result};
use crate::manifest::{Manifest, ManifestRecord, SmileLabel};

/// Posed is the positive class: tp/fn count posed truths, tn/fp count
/// spontaneous truths.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub tp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
    pub fp: usize,
}

impl ConfusionMatrix {
    pub fn record(&mut self, truth: SmileLabel, predicted: SmileLabel) {
        match (truth, predicted) {
            (SmileLabel::Posed, SmileLabel::Posed) => self.tp += 1,
            (SmileLabel::Posed, SmileLabel::Spontaneous) => self.fn_ += 1,
            (SmileLabel::Spontaneous, SmileLabel::Spontaneous) => self.tn += 1,
            (SmileLabel::Spontaneous, SmileLabel::Posed) => self.fp += 1,
        }
    }

    pub fn add(&mut self, other: &ConfusionMatrix) {
        self.tp += other.tp;
        self.fn_ += other.fn_;
        self.tn += other.tn;
        self.fp += other.fp;
    }

    pub fn total(&self) -> usize {
        self.tp + self.fn_ + self.tn + self.fp
    }

    /// Accuracy on posed truths, percent.
    pub fn posed_accuracy(&self) -> f64 {
        100.0 * self.tp as f64 / (self.tp + self.fn_).max(1) as f64
    }

    /// Accuracy on spontaneous truths, percent.
    pub fn spontaneous_accuracy(&self) -> f64 {
        100.0 * self.tn as f64 / (self.tn + self.fp).max(1) as f64
    }

    pub fn overall_accuracy(&self) -> f64 {
        100.0 * (self.tp + self.tn) as f64 / self.total().max(1) as f64
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// (fold id, confusion) pairs in fold order.
    pub folds: Vec<(u32, ConfusionMatrix)>,
    pub aggregate: ConfusionMatrix,
    /// Echo of the pipeline configuration that produced the features.
    pub config_echo: String,
}

impl EvalReport {
    pub fn overall_accuracy(&self) -> f64 {
        self.aggregate.overall_accuracy()
    }
}

/// Runs the 10-fold protocol: for each fold present in the manifest,
/// train (standardization + SVM) on the other folds and test on it.
/// `features` resolves each record to its fixed-length vector.
pub fn run_cross_validation<F>(
    manifest: &Manifest,
    train_cfg: &TrainConfig,
    config_echo: &str,
    features: F,
) -> Result<EvalReport>
where
    F: Fn(&ManifestRecord) -> Result<Vec<f64>>,
{
    let folds = manifest.folds_present();
    if folds.is_empty() {
        return Err(Error::Invalid("manifest has no records".into()));
    }
    let mut cached: Vec<(u32, SmileLabel, Vec<f64>)> = Vec::with_capacity(manifest.records.len());
    for rec in &manifest.records {
        cached.push((rec.fold, rec.label, features(rec)?));
    }

    let mut fold_results = Vec::with_capacity(folds.len());
    let mut aggregate = ConfusionMatrix::default();
    for &test_fold in &folds {
        let mut train_x = Vec::new();
        let mut train_y = Vec::new();
        let mut test = Vec::new();
        for (fold, label, vec) in &cached {
            if *fold == test_fold {
                test.push((*label, vec));
            } else {
                train_x.push(vec.clone());
                train_y.push(label.to_sign());
            }
        }
        if test.is_empty() {
            return Err(Error::Invalid(format!("fold {test_fold} is empty")));
        }
        // Standardization statistics come from the training folds only.
        let model = fit(&train_x, &train_y, train_cfg)?;
        let mut cm = ConfusionMatrix::default();
        for (truth, vec) in test {
            let (predicted, _) = svm_predict(&model, vec)?;
            cm.record(truth, predicted);
        }
        aggregate.add(&cm);
        fold_results.push((test_fold, cm));
    }

    Ok(EvalReport {
        folds: fold_results,
        aggregate,
        config_echo: config_echo.to_string(),
    })
}

/// Class-count weighted overall accuracy, reproducing the relationship
/// between per-class and overall rates.
pub fn weighted_overall(
    posed_acc: f64,
    spont_acc: f64,
    n_posed: usize,
    n_spont: usize,
) -> Result<f64> {
    if n_posed + n_spont == 0 {
        return Err(Error::Invalid("weighted_overall with zero totals".into()));
    }
    if !(0.0..=100.0).contains(&posed_acc) || !(0.0..=100.0).contains(&spont_acc) {
        return Err(Error::Invalid("accuracies must be in [0, 100]".into()));
    }
    Ok((posed_acc * n_posed as f64 + spont_acc * n_spont as f64) / (n_posed + n_spont) as f64)
}

/// CSV report: header plus one row per fold and a final aggregate row.
pub fn report_csv(report: &EvalReport) -> String {
    let mut out = String::from("fold,tp,fn,tn,fp,posed_acc,spont_acc,overall_acc\n");
    let mut row = |name: &str, cm: &ConfusionMatrix| {
        let _ = writeln!(
            out,
            "{name},{},{},{},{},{:.4},{:.4},{:.4}",
            cm.tp,
            cm.fn_,
            cm.tn,
            cm.fp,
            cm.posed_accuracy(),
            cm.spontaneous_accuracy(),
            cm.overall_accuracy()
        );
    };
    for (fold, cm) in &report.folds {
        row(&fold.to_string(), cm);
    }
    row("aggregate", &report.aggregate);
    out
}

pub fn write_report_csv(report: &EvalReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, report_csv(report)).map_err(|e| Error::io(path, e))
}

/// Grid of results for the markdown table: rows are descriptors, columns
/// normalization x EVM cells holding (posed, spontaneous) accuracy pairs.
#[derive(Debug, Default, Clone)]
pub struct ReportGrid {
    cells: BTreeMap<(String, String), (f64, f64)>,
    rows: Vec<String>,
    cols: Vec<String>,
}

impl ReportGrid {
    pub fn insert(&mut self, descriptor: &str, column: &str, report: &EvalReport) {
        if !self.rows.iter().any(|r| r == descriptor) {
            self.rows.push(descriptor.to_string());
        }
        if !self.cols.iter().any(|c| c == column) {
            self.cols.push(column.to_string());
        }
        self.cells.insert(
            (descriptor.to_string(), column.to_string()),
            (
                report.aggregate.posed_accuracy(),
                report.aggregate.spontaneous_accuracy(),
            ),
        );
    }

    pub fn render_markdown(&self) -> String {
        let mut out = String::from("| descriptor |");
        for c in &self.cols {
            let _ = write!(out, " {c} |");
        }
        out.push('\n');
        out.push_str("|---|");
        for _ in &self.cols {
            out.push_str("---|");
        }
        out.push('\n');
        for r in &self.rows {
            let _ = write!(out, "| {r} |");
            for c in &self.cols {
                match self.cells.get(&(r.clone(), c.clone())) {
                    Some((p, s)) => {
                        let _ = write!(out, " {p:.1}, {s:.1} |");
                    }
                    None => out.push_str(" - |"),
                }
            }
            out.push('\n');
        }
        out
    }
}

/// Assigns stratified random folds 1..10, seeded; used for synthetic
/// datasets. Dataset-provided folds are otherwise never re-randomized.
pub fn make_folds(manifest: &mut Manifest, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for label in [SmileLabel::Posed, SmileLabel::Spontaneous] {
        let mut idx: Vec<usize> = manifest
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.label == label)
            .map(|(i, _)| i)
            .collect();
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            manifest.records[i].fold = (pos % 10) as u32 + 1;
        }
    }
}
