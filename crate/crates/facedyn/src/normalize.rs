//! The three cropping strategies: eye-location similarity alignment,
//! face-orientation derotation, and a fixed no-normalization crop.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::{warp_affine, VideoSequence};
use crate::geometry::{AffineTransform, BoundingBox};
use crate::tracking::TrackResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormalizationMode {
    EyeLocation,
    FaceOrientation,
    NoNormalization,
}

/// Canonical output geometry. Modes 1-2 use `out_w x out_h` with the eye
/// anchors; mode 3 uses the larger `crop_w x crop_h` fixed crop.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CanonicalLayout {
    pub out_w: usize,
    pub out_h: usize,
    pub crop_w: usize,
    pub crop_h: usize,
    pub interocular_target: f64,
    pub left_eye_anchor: (f64, f64),
    pub right_eye_anchor: (f64, f64),
    /// Mode 2: the frame-0 face-box width is scaled to this many pixels.
    pub box_width_target: f64,
}

impl Default for CanonicalLayout {
    fn default() -> Self {
        CanonicalLayout {
            out_w: 400,
            out_h: 500,
            crop_w: 720,
            crop_h: 900,
            interocular_target: 234.0,
            left_eye_anchor: (83.0, 165.0),
            right_eye_anchor: (317.0, 165.0),
            box_width_target: 360.0,
        }
    }
}

impl CanonicalLayout {
    /// Uniformly scaled layout; used to run the full pipeline on small
    /// synthetic inputs.
    pub fn scaled(&self, f: f64) -> CanonicalLayout {
        CanonicalLayout {
            out_w: (self.out_w as f64 * f).round() as usize,
            out_h: (self.out_h as f64 * f).round() as usize,
            crop_w: (self.crop_w as f64 * f).round() as usize,
            crop_h: (self.crop_h as f64 * f).round() as usize,
            interocular_target: self.interocular_target * f,
            left_eye_anchor: (self.left_eye_anchor.0 * f, self.left_eye_anchor.1 * f),
            right_eye_anchor: (self.right_eye_anchor.0 * f, self.right_eye_anchor.1 * f),
            box_width_target: self.box_width_target * f,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.out_w == 0 || self.out_h == 0 || self.crop_w == 0 || self.crop_h == 0 {
            return Err(Error::Invalid("layout dimensions must be positive".into()));
        }
        let d = self.right_eye_anchor.0 - self.left_eye_anchor.0;
        if (d - self.interocular_target).abs() > 1e-6 {
            return Err(Error::Invalid(format!(
                "anchor spacing {d} != interocular target {}",
                self.interocular_target
            )));
        }
        if (self.left_eye_anchor.1 - self.right_eye_anchor.1).abs() > 1e-6 {
            return Err(Error::Invalid("eye anchors must share a row".into()));
        }
        let margin = self.left_eye_anchor.0 + self.right_eye_anchor.0 - self.out_w as f64;
        if margin.abs() > 1e-6 {
            return Err(Error::Invalid(
                "eye anchors must be horizontally centered".into(),
            ));
        }
        if self.box_width_target <= 0.0 || self.interocular_target <= 0.0 {
            return Err(Error::Invalid("layout targets must be positive".into()));
        }
        Ok(())
    }
}

fn check_track_len(video: &VideoSequence, track: &TrackResult) -> Result<()> {
    if track.frames.len() != video.len() {
        return Err(Error::Invalid(format!(
            "track covers {} frames, video has {}",
            track.frames.len(),
            video.len()
        )));
    }
    Ok(())
}

/// Similarity transform mapping the tracked eye centers onto the layout
/// anchors.
pub fn eye_similarity(
    left_eye: (f64, f64),
    right_eye: (f64, f64),
    layout: &CanonicalLayout,
) -> Result<AffineTransform> {
    AffineTransform::similarity_from_pairs(
        left_eye,
        right_eye,
        layout.left_eye_anchor,
        layout.right_eye_anchor,
    )
}

/// Mode 1: per frame, warp so the eyes land on the anchors; crop to
/// `out_w x out_h`.
pub fn normalize_eye_location(
    video: &VideoSequence,
    track: &TrackResult,
    layout: &CanonicalLayout,
) -> Result<VideoSequence> {
    layout.validate()?;
    check_track_len(video, track)?;
    let mut frames = Vec::with_capacity(video.len());
    for (t, frame) in video.frames().iter().enumerate() {
        let tf = &track.frames[t];
        let sim = eye_similarity(tf.left_eye, tf.right_eye, layout).map_err(|e| match e {
            Error::DegenerateGeometry(msg) => {
                Error::DegenerateGeometry(format!("frame {t}: {msg}"))
            }
            other => other,
        })?;
        frames.push(warp_affine(frame, &sim, layout.out_w, layout.out_h)?);
    }
    VideoSequence::new(frames, video.fps())
}

/// Mode 2 per-frame transform: derotate by the cumulative rotation angle
/// about the tracked box center, scale the frame-0 box width to
/// `box_width_target`, and center the box in the output.
pub fn face_orientation_transform(
    cumulative: &AffineTransform,
    box_center: (f64, f64),
    frame0_box_width: f64,
    layout: &CanonicalLayout,
) -> Result<AffineTransform> {
    if frame0_box_width <= 0.0 {
        return Err(Error::DegenerateGeometry(
            "frame-0 box width must be positive".into(),
        ));
    }
    let theta = cumulative.rotation_angle();
    let scale = layout.box_width_target / frame0_box_width;
    let rotate = AffineTransform::rotation_about(-theta, box_center.0, box_center.1, scale);
    let recentre = AffineTransform::translation(
        layout.out_w as f64 / 2.0 - box_center.0,
        layout.out_h as f64 / 2.0 - box_center.1,
    );
    Ok(recentre.compose(&rotate))
}

/// Mode 2: per frame, rotate by minus the tracked rotation about the box
/// center and crop `out_w x out_h` around it.
pub fn normalize_face_orientation(
    video: &VideoSequence,
    track: &TrackResult,
    layout: &CanonicalLayout,
) -> Result<VideoSequence> {
    layout.validate()?;
    check_track_len(video, track)?;
    let corners0 = track.frames[0].face_corners;
    let frame0_box_width =
        ((corners0[1].0 - corners0[0].0).powi(2) + (corners0[1].1 - corners0[0].1).powi(2)).sqrt();
    let mut frames = Vec::with_capacity(video.len());
    for (t, frame) in video.frames().iter().enumerate() {
        let tf = &track.frames[t];
        let transform = face_orientation_transform(
            &tf.cumulative_transform,
            tf.face_center(),
            frame0_box_width,
            layout,
        )?;
        frames.push(warp_affine(frame, &transform, layout.out_w, layout.out_h)?);
    }
    VideoSequence::new(frames, video.fps())
}

/// Mode 3: fixed `crop_w x crop_h` crop centered on the frame-0 face-box
/// center, identical in every frame, border-clamped.
pub fn crop_no_normalization(
    video: &VideoSequence,
    face_box_frame0: &BoundingBox,
    layout: &CanonicalLayout,
) -> Result<VideoSequence> {
    layout.validate()?;
    let (cx, cy) = face_box_frame0.center();
    let transform = AffineTransform::translation(
        layout.crop_w as f64 / 2.0 - cx,
        layout.crop_h as f64 / 2.0 - cy,
    );
    let mut frames = Vec::with_capacity(video.len());
    for frame in video.frames() {
        frames.push(warp_affine(frame, &transform, layout.crop_w, layout.crop_h)?);
    }
    VideoSequence::new(frames, video.fps())
}

/// Dispatch on mode. Mode 3 ignores everything but the frame-0 box.
pub fn normalize_sequence(
    video: &VideoSequence,
    track: &TrackResult,
    mode: NormalizationMode,
    layout: &CanonicalLayout,
) -> Result<VideoSequence> {
    match mode {
        NormalizationMode::EyeLocation => normalize_eye_location(video, track, layout),
        NormalizationMode::FaceOrientation => normalize_face_orientation(video, track, layout),
        NormalizationMode::NoNormalization => {
            let bx = BoundingBox::hull(&track.frames[0].face_corners)?;
            crop_no_normalization(video, &bx, layout)
        }
    }
}
