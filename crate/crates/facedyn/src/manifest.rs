//! Dataset manifest: video paths, labels, initial boxes, and CV folds.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmileLabel {
    Posed,
    Spontaneous,
}

impl SmileLabel {
    /// Sign convention used by the classifier: posed is the positive class.
    pub fn to_sign(self) -> f64 {
        match self {
            SmileLabel::Posed => 1.0,
            SmileLabel::Spontaneous => -1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    pub video_id: String,
    pub path: String,
    pub label: SmileLabel,
    pub fold: u32,
    pub face_box: BoundingBox,
    pub left_eye_box: BoundingBox,
    pub right_eye_box: BoundingBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_features_path: Option<String>,
    #[serde(default = "default_fps")]
    pub fps: f64,
}

fn default_fps() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub records: Vec<ManifestRecord>,
}

impl Manifest {
    pub fn new(records: Vec<ManifestRecord>) -> Result<Self> {
        let m = Manifest { records };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for rec in &self.records {
            if !seen.insert(rec.video_id.as_str()) {
                return Err(Error::Manifest(format!(
                    "duplicate video_id '{}'",
                    rec.video_id
                )));
            }
            if rec.fold < 1 || rec.fold > 10 {
                return Err(Error::Manifest(format!(
                    "record '{}': fold {} outside 1..10",
                    rec.video_id, rec.fold
                )));
            }
            if !(rec.fps > 0.0) {
                return Err(Error::Manifest(format!(
                    "record '{}': fps must be positive",
                    rec.video_id
                )));
            }
            for (name, bx) in [
                ("face_box", &rec.face_box),
                ("left_eye_box", &rec.left_eye_box),
                ("right_eye_box", &rec.right_eye_box),
            ] {
                if bx.w <= 0.0 || bx.h <= 0.0 {
                    return Err(Error::Manifest(format!(
                        "record '{}': {name} has non-positive size",
                        rec.video_id
                    )));
                }
            }
            for (name, bx) in [
                ("left_eye_box", &rec.left_eye_box),
                ("right_eye_box", &rec.right_eye_box),
            ] {
                if !rec.face_box.contains_box(bx) {
                    return Err(Error::Manifest(format!(
                        "record '{}': {name} is not inside face_box",
                        rec.video_id
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn folds_present(&self) -> Vec<u32> {
        let mut folds: Vec<u32> = self
            .records
            .iter()
            .map(|r| r.fold)
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        folds.sort_unstable();
        folds
    }

    pub fn find(&self, video_id: &str) -> Option<&ManifestRecord> {
        self.records.iter().find(|r| r.video_id == video_id)
    }
}

pub fn parse_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    manifest.validate()?;
    Ok(manifest)
}

pub fn write_manifest(manifest: &Manifest, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(manifest)?;
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
