//! End-to-end orchestration: per-video stage chaining (track, normalize,
//! magnify, extract, temporal) with content-addressed caching, and the
//! cross-validated evaluation entry point.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classify::TrainConfig;
use crate::error::{Error, Result};
use crate::features::{
    extract_flow_regions, farneback_flow, hog_descriptor, ingest_external_features,
    lpq_descriptor, DescriptorKind, FeatureMatrix, FlowParams, HogParams, LpqParams, RegionLayout,
};
use crate::frame::VideoSequence;
use crate::geometry::{AffineTransform, BoundingBox};
use crate::io::{load_sequence, read_feature_matrix, write_feature_matrix};
use crate::magnify::{magnify_sequence, MagnifyParams};
use crate::manifest::{parse_manifest, Manifest, ManifestRecord};
use crate::normalize::{
    eye_similarity, face_orientation_transform, normalize_sequence, CanonicalLayout,
    NormalizationMode,
};
use crate::temporal::{flatten, normalize_length, TemporalConfig};
use crate::tracking::{track_sequence, TrackResult};
use crate::eval::{run_cross_validation, EvalReport};

pub const EXTERNAL_DIM_DEFAULT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub normalization: NormalizationMode,
    pub use_evm: bool,
    pub descriptor: DescriptorKind,
    pub magnify: MagnifyParams,
    pub lpq: LpqParams,
    pub hog: HogParams,
    pub flow: FlowParams,
    pub temporal: TemporalConfig,
    pub svm: TrainConfig,
    pub layout: CanonicalLayout,
    /// Uniform scale applied to `layout`; lets the full pipeline run on
    /// small synthetic inputs.
    pub layout_scale: f64,
    pub external_dim: usize,
    pub cache_dir: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            normalization: NormalizationMode::EyeLocation,
            use_evm: false,
            descriptor: DescriptorKind::Lpq,
            magnify: MagnifyParams::default(),
            lpq: LpqParams::default(),
            hog: HogParams::default(),
            flow: FlowParams::default(),
            temporal: TemporalConfig::default(),
            svm: TrainConfig::default(),
            layout: CanonicalLayout::default(),
            layout_scale: 1.0,
            external_dim: EXTERNAL_DIM_DEFAULT,
            cache_dir: None,
        }
    }
}

impl PipelineConfig {
    pub fn effective_layout(&self) -> CanonicalLayout {
        if (self.layout_scale - 1.0).abs() < f64::EPSILON {
            self.layout
        } else {
            self.layout.scaled(self.layout_scale)
        }
    }

    pub fn validate(&self, manifest: &Manifest) -> Result<()> {
        if self.layout_scale <= 0.0 {
            return Err(Error::Invalid("layout_scale must be positive".into()));
        }
        self.effective_layout().validate()?;
        self.lpq.validate()?;
        self.hog.validate()?;
        self.flow.validate()?;
        self.temporal.validate()?;
        self.svm.validate()?;
        if self.descriptor == DescriptorKind::External {
            for rec in &manifest.records {
                if rec.external_features_path.is_none() {
                    return Err(Error::Invalid(format!(
                        "descriptor 'external' but record '{}' has no external_features_path",
                        rec.video_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// JSON echo of the fields that influence a cached feature vector:
    /// classifier settings and cache location are excluded so SVM sweeps
    /// reuse cached features.
    fn feature_key_json(&self) -> String {
        let descriptor_params = match self.descriptor {
            DescriptorKind::Lpq => serde_json::to_value(self.lpq),
            DescriptorKind::Hog => serde_json::to_value(self.hog),
            DescriptorKind::Flow => serde_json::to_value(self.flow),
            DescriptorKind::External => serde_json::to_value(self.external_dim),
        }
        .expect("parameter serialization cannot fail");
        let magnify = if self.use_evm {
            serde_json::to_value(self.magnify).expect("parameter serialization cannot fail")
        } else {
            serde_json::Value::Null
        };
        serde_json::json!({
            "normalization": self.normalization,
            "use_evm": self.use_evm,
            "descriptor": self.descriptor,
            "descriptor_params": descriptor_params,
            "magnify": magnify,
            "temporal": self.temporal,
            "layout": self.layout,
            "layout_scale": self.layout_scale,
        })
        .to_string()
    }
}

pub fn load_config(path: impl AsRef<Path>) -> Result<PipelineConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// 64-bit FNV-1a, used for content-addressed cache keys.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Writes `bytes` atomically: temp file in the same directory + rename.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn stage_err(video_id: &str, stage: &str, e: Error) -> Error {
    Error::Invalid(format!("video '{video_id}', stage {stage}: {e}"))
}

/// Tracks a video, consulting the cache. The key covers the resolved
/// video path and fps; tracking has no tunable configuration.
fn tracked(
    record: &ManifestRecord,
    video: &VideoSequence,
    video_path: &Path,
    cache_dir: Option<&Path>,
) -> Result<TrackResult> {
    let key = fnv1a(format!("track|{}|{}", video_path.display(), record.fps).as_bytes());
    let cache_path = cache_dir.map(|d| d.join(format!("track_{key:016x}.json")));
    if let Some(p) = &cache_path {
        if p.exists() {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            return Ok(serde_json::from_str(&text)?);
        }
    }
    let track = track_sequence(
        video,
        &record.face_box,
        &record.left_eye_box,
        &record.right_eye_box,
    )?;
    if let Some(p) = &cache_path {
        write_atomic(p, serde_json::to_string(&track)?.as_bytes())?;
    }
    Ok(track)
}

/// The affine transform applied to frame `t` by the chosen normalization
/// mode; used to carry eye geometry into the normalized coordinate frame.
fn normalization_transform(
    mode: NormalizationMode,
    layout: &CanonicalLayout,
    track: &TrackResult,
    t: usize,
) -> Result<AffineTransform> {
    let tf = &track.frames[t];
    match mode {
        NormalizationMode::EyeLocation => eye_similarity(tf.left_eye, tf.right_eye, layout),
        NormalizationMode::FaceOrientation => {
            let corners0 = track.frames[0].face_corners;
            let w0 = ((corners0[1].0 - corners0[0].0).powi(2)
                + (corners0[1].1 - corners0[0].1).powi(2))
            .sqrt();
            face_orientation_transform(&tf.cumulative_transform, tf.face_center(), w0, layout)
        }
        NormalizationMode::NoNormalization => {
            let (cx, cy) = BoundingBox::hull(&track.frames[0].face_corners)?.center();
            Ok(AffineTransform::translation(
                layout.crop_w as f64 / 2.0 - cx,
                layout.crop_h as f64 / 2.0 - cy,
            ))
        }
    }
}

fn warp_box(bx: &BoundingBox, t: &AffineTransform) -> Result<BoundingBox> {
    BoundingBox::hull(&bx.corners().map(|(x, y)| t.apply(x, y)))
}

fn descriptor_matrix(
    record: &ManifestRecord,
    config: &PipelineConfig,
    normalized: &VideoSequence,
    track: &TrackResult,
    layout: &CanonicalLayout,
) -> Result<FeatureMatrix> {
    match config.descriptor {
        DescriptorKind::Lpq => {
            let rows = normalized
                .frames()
                .iter()
                .map(|f| lpq_descriptor(f, &config.lpq))
                .collect::<Result<Vec<_>>>()?;
            FeatureMatrix::from_rows(rows, DescriptorKind::Lpq)
        }
        DescriptorKind::Hog => {
            let rows = normalized
                .frames()
                .iter()
                .map(|f| hog_descriptor(f, &config.hog))
                .collect::<Result<Vec<_>>>()?;
            FeatureMatrix::from_rows(rows, DescriptorKind::Hog)
        }
        DescriptorKind::Flow => {
            let mut rows = Vec::with_capacity(normalized.len() - 1);
            for t in 0..normalized.len() - 1 {
                let norm_t = normalization_transform(config.normalization, layout, track, t)?;
                let cum = &track.frames[t].cumulative_transform;
                let to_normalized = norm_t.compose(cum);
                let left = norm_t.apply(track.frames[t].left_eye.0, track.frames[t].left_eye.1);
                let right = norm_t.apply(track.frames[t].right_eye.0, track.frames[t].right_eye.1);
                let region_layout = RegionLayout::from_eye_centers(
                    left,
                    right,
                    warp_box(&record.left_eye_box, &to_normalized)?,
                    warp_box(&record.right_eye_box, &to_normalized)?,
                )?;
                let flow = farneback_flow(
                    &normalized.frames()[t],
                    &normalized.frames()[t + 1],
                    &config.flow,
                )?;
                rows.push(extract_flow_regions(&flow, &region_layout)?);
            }
            FeatureMatrix::from_rows(rows, DescriptorKind::Flow)
        }
        DescriptorKind::External => unreachable!("external features bypass video processing"),
    }
}

/// Values as they round-trip through the f32 FDM1 cache file, so cached
/// and uncached runs are bit-identical.
fn roundtrip_f32(v: Vec<f64>) -> Vec<f64> {
    v.into_iter().map(|x| x as f32 as f64).collect()
}

/// Computes (or retrieves from cache) the final per-video feature vector.
pub fn video_feature_vector(
    record: &ManifestRecord,
    config: &PipelineConfig,
    base_dir: &Path,
) -> Result<Vec<f64>> {
    let cache_dir = config.cache_dir.as_deref();
    if let Some(d) = cache_dir {
        std::fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let video_path = base_dir.join(&record.path);
    let key = fnv1a(
        format!(
            "feat|{}|{}|{}|{}",
            config.feature_key_json(),
            video_path.display(),
            record.video_id,
            record.fps
        )
        .as_bytes(),
    );
    let cache_path = cache_dir.map(|d| d.join(format!("feat_{key:016x}.fdm")));
    if let Some(p) = &cache_path {
        if p.exists() {
            let m = read_feature_matrix(p, config.descriptor)?;
            return Ok(m.data().to_vec());
        }
    }

    let matrix = if config.descriptor == DescriptorKind::External {
        let rel = record
            .external_features_path
            .as_ref()
            .ok_or_else(|| {
                stage_err(
                    &record.video_id,
                    "extract",
                    Error::Invalid("missing external_features_path".into()),
                )
            })?;
        ingest_external_features(base_dir.join(rel), config.external_dim)
            .map_err(|e| stage_err(&record.video_id, "extract", e))?
    } else {
        let video = load_sequence(&video_path, record.fps)
            .map_err(|e| stage_err(&record.video_id, "load", e))?;
        let track = tracked(record, &video, &video_path, cache_dir)
            .map_err(|e| stage_err(&record.video_id, "track", e))?;
        let layout = config.effective_layout();
        let mut normalized = normalize_sequence(&video, &track, config.normalization, &layout)
            .map_err(|e| stage_err(&record.video_id, "normalize", e))?;
        if config.use_evm {
            normalized = magnify_sequence(&normalized, &config.magnify)
                .map_err(|e| stage_err(&record.video_id, "magnify", e))?;
        }
        descriptor_matrix(record, config, &normalized, &track, &layout)
            .map_err(|e| stage_err(&record.video_id, "extract", e))?
    };

    let fixed = normalize_length(&matrix, &config.temporal)
        .map_err(|e| stage_err(&record.video_id, "temporal", e))?;
    let vector = flatten(&fixed);

    if let Some(p) = &cache_path {
        let row = FeatureMatrix::new(1, vector.len(), vector.clone(), config.descriptor)?;
        let tmp = p.with_extension(format!("tmp{}", std::process::id()));
        write_feature_matrix(&row, &tmp)?;
        std::fs::rename(&tmp, p).map_err(|e| Error::io(p, e))?;
    }
    Ok(roundtrip_f32(vector))
}

/// Full pipeline: parse and validate, compute every video's feature
/// vector (in parallel, cache-aware), then 10-fold cross-validate.
pub fn run_pipeline(manifest_path: impl AsRef<Path>, config: &PipelineConfig) -> Result<EvalReport> {
    let manifest_path = manifest_path.as_ref();
    let manifest = parse_manifest(manifest_path)?;
    config.validate(&manifest)?;
    let base_dir = manifest_path.parent().unwrap_or(Path::new(".")).to_path_buf();

    let vectors: Vec<Vec<f64>> = manifest
        .records
        .par_iter()
        .map(|rec| video_feature_vector(rec, config, &base_dir))
        .collect::<Result<Vec<_>>>()?;
    let by_id: HashMap<&str, &Vec<f64>> = manifest
        .records
        .iter()
        .map(|r| r.video_id.as_str())
        .zip(&vectors)
        .collect();

    let echo = serde_json::to_string(config)?;
    run_cross_validation(&manifest, &config.svm, &echo, |rec| {
        Ok(by_id[rec.video_id.as_str()].clone())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::report_csv;
    use crate::synth::generate_benchmark_dataset;

    #[test]
    fn fnv1a_known_vectors() {
        assert_eq!(fnv1a(b""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(fnv1a(b"a"), 0xaf63_dc4c_8601_ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn config_default_roundtrips() {
        let config = PipelineConfig::default();
        let text = serde_json::to_string(&config).unwrap();
        let back: PipelineConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(config, back);
        // Partial configs pick up defaults.
        let partial: PipelineConfig =
            serde_json::from_str(r#"{"descriptor":"hog","use_evm":true}"#).unwrap();
        assert_eq!(partial.descriptor, DescriptorKind::Hog);
        assert!(partial.use_evm);
        assert_eq!(partial.temporal.target_len, 100);
    }

    #[test]
    fn external_without_paths_rejected_before_processing() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = generate_benchmark_dataset(dir.path(), 2, 1).unwrap();
        let config = PipelineConfig {
            descriptor: DescriptorKind::External,
            ..Default::default()
        };
        match config.validate(&manifest) {
            Err(Error::Invalid(msg)) => assert!(msg.contains("synth_000"), "{msg}"),
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    fn bench_config(cache: Option<PathBuf>) -> PipelineConfig {
        PipelineConfig {
            descriptor: DescriptorKind::Hog,
            hog: HogParams {
                cell: 8,
                ..Default::default()
            },
            layout_scale: 0.2,
            temporal: TemporalConfig { target_len: 24 },
            cache_dir: cache,
            ..Default::default()
        }
    }

    #[test]
    fn mini_pipeline_cached_and_uncached_agree() {
        let dir = tempfile::tempdir().unwrap();
        let data = dir.path().join("data");
        generate_benchmark_dataset(&data, 4, 9).unwrap();
        let manifest_path = data.join("manifest.json");

        let cache = dir.path().join("cache");
        let cached_cfg = bench_config(Some(cache.clone()));
        let first = run_pipeline(&manifest_path, &cached_cfg).unwrap();
        assert!(std::fs::read_dir(&cache).unwrap().count() > 0);
        let second = run_pipeline(&manifest_path, &cached_cfg).unwrap();
        let uncached = run_pipeline(&manifest_path, &bench_config(None)).unwrap();
        assert_eq!(report_csv(&first), report_csv(&second));
        assert_eq!(report_csv(&first), report_csv(&uncached));
    }
}
