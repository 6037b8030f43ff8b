//! Seeded synthetic benchmark: schematic faces whose mouth curve rises
//! with a fast (posed) or slow (spontaneous) logistic onset, written as
//! frame directories plus a manifest.

use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::frame::{Frame, VideoSequence};
use crate::geometry::BoundingBox;
use crate::io::save_sequence;
use crate::manifest::{Manifest, ManifestRecord, SmileLabel};

pub const SYNTH_WIDTH: usize = 96;
pub const SYNTH_HEIGHT: usize = 96;
pub const SYNTH_FRAMES: usize = 40;
pub const SYNTH_FPS: f64 = 50.0;

const FAST_ONSET_RATE: f64 = 1.2;
const SLOW_ONSET_RATE: f64 = 0.12;

const LEFT_EYE: (f64, f64) = (34.0, 38.0);
const RIGHT_EYE: (f64, f64) = (58.0, 38.0);
const MOUTH_CENTER: (f64, f64) = (46.0, 62.0);
const MOUTH_HALF_WIDTH: f64 = 12.0;
const MOUTH_BEND: f64 = 5.0;

#[derive(Debug, Clone, Copy)]
struct VideoSpec {
    label: SmileLabel,
    /// Seeds the dataset-wide base texture shared by every video.
    base_seed: u64,
    /// Seeds a weak per-video texture perturbation.
    jitter_seed: u64,
    onset_frame: f64,
}

fn face_box() -> BoundingBox {
    BoundingBox::new(22.0, 20.0, 52.0, 60.0).unwrap()
}

fn left_eye_box() -> BoundingBox {
    BoundingBox::new(LEFT_EYE.0 - 5.0, LEFT_EYE.1 - 4.0, 10.0, 8.0).unwrap()
}

fn right_eye_box() -> BoundingBox {
    BoundingBox::new(RIGHT_EYE.0 - 5.0, RIGHT_EYE.1 - 4.0, 10.0, 8.0).unwrap()
}

/// Smooth trackable texture from a seeded sum of random sinusoids.
struct TextureField {
    terms: Vec<(f64, f64, f64, f64)>, // (kx, ky, phase, amplitude)
}

impl TextureField {
    /// Strong base terms shared across the dataset plus weak per-video
    /// jitter terms, so inter-video appearance variation stays small
    /// relative to the class-defining mouth dynamics.
    fn new(base_seed: u64, jitter_seed: u64) -> Self {
        let mut base = ChaCha8Rng::seed_from_u64(base_seed);
        let mut jitter = ChaCha8Rng::seed_from_u64(jitter_seed);
        let mut terms: Vec<_> = (0..12)
            .map(|_| {
                (
                    base.random_range(0.15..0.9),
                    base.random_range(0.15..0.9),
                    base.random_range(0.0..std::f64::consts::TAU),
                    base.random_range(0.02..0.06),
                )
            })
            .collect();
        terms.extend((0..4).map(|_| {
            (
                jitter.random_range(0.15..0.9),
                jitter.random_range(0.15..0.9),
                jitter.random_range(0.0..std::f64::consts::TAU),
                jitter.random_range(0.003..0.008),
            )
        }));
        TextureField { terms }
    }

    fn at(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(kx, ky, phase, amp)| amp * (kx * x + ky * y + phase).sin())
            .sum()
    }
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn render_frame(spec: &VideoSpec, texture: &TextureField, t: usize) -> Frame {
    let rate = match spec.label {
        SmileLabel::Posed => FAST_ONSET_RATE,
        SmileLabel::Spontaneous => SLOW_ONSET_RATE,
    };
    let s = logistic(rate * (t as f64 - spec.onset_frame));
    Frame::from_fn(SYNTH_WIDTH, SYNTH_HEIGHT, |x, y| {
        let xf = x as f64;
        let yf = y as f64;
        let mut v = 0.55 + texture.at(xf, yf);
        // Eyes: dark Gaussian blobs.
        for eye in [LEFT_EYE, RIGHT_EYE] {
            let r2 = (xf - eye.0).powi(2) + (yf - eye.1).powi(2);
            v -= 0.35 * (-r2 / (2.0 * 4.0)).exp();
        }
        // Mouth: dark band along a parabola whose bend grows with s.
        let u = (xf - MOUTH_CENTER.0) / MOUTH_HALF_WIDTH;
        if u.abs() <= 1.3 {
            let curve_y = MOUTH_CENTER.1 + s * MOUTH_BEND * (u * u - 1.0);
            let d = yf - curve_y;
            v -= 0.3 * (-(d * d) / (2.0 * 1.5)).exp() * (1.0 - (u.abs() - 1.0).max(0.0) / 0.3);
        }
        v.clamp(0.02, 0.98) as f32
    })
}

fn render_video(spec: &VideoSpec) -> Result<VideoSequence> {
    let texture = TextureField::new(spec.base_seed, spec.jitter_seed);
    let frames = (0..SYNTH_FRAMES)
        .map(|t| render_frame(spec, &texture, t))
        .collect();
    VideoSequence::new(frames, SYNTH_FPS)
}

/// Generates `n_videos` synthetic smile videos (half posed fast-onset,
/// half spontaneous slow-onset) under `dir`, one frame directory per
/// video, plus `manifest.json` with stratified folds 1..10. Video paths
/// in the manifest are relative to `dir`.
pub fn generate_benchmark_dataset(dir: impl AsRef<Path>, n_videos: usize, seed: u64) -> Result<Manifest> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| crate::error::Error::io(dir, e))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut records = Vec::with_capacity(n_videos);
    for i in 0..n_videos {
        let label = if i % 2 == 0 {
            SmileLabel::Posed
        } else {
            SmileLabel::Spontaneous
        };
        let spec = VideoSpec {
            label,
            base_seed: seed,
            jitter_seed: rng.random(),
            onset_frame: rng.random_range(16.0..24.0),
        };
        let video_id = format!("synth_{i:03}");
        let video = render_video(&spec)?;
        save_sequence(&video, dir.join(&video_id))?;
        records.push(ManifestRecord {
            video_id: video_id.clone(),
            path: video_id,
            label,
            // Stratified: posed and spontaneous alternate, so pairing
            // consecutive indices per fold balances both classes.
            fold: (i as u32 / 2) % 10 + 1,
            face_box: face_box(),
            left_eye_box: left_eye_box(),
            right_eye_box: right_eye_box(),
            external_features_path: None,
            fps: SYNTH_FPS,
        });
    }
    let manifest = Manifest::new(records)?;
    crate::manifest::write_manifest(&manifest, dir.join("manifest.json"))?;
    Ok(manifest)
}
