//! Facial region selection for dense-flow features: eyes, nose, and
//! mouth boxes derived from the eye centers, resampled to fixed sizes so
//! the descriptor dimension is constant across frames and videos.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::Plane;
use crate::geometry::BoundingBox;

use super::FlowField;

/// Fixed resample sizes (w, h) per region.
pub const EYE_SIZE: (usize, usize) = (48, 32);
pub const NOSE_SIZE: (usize, usize) = (64, 64);
pub const MOUTH_SIZE: (usize, usize) = (96, 48);

/// Total descriptor length: dx and dy for every resampled region pixel.
pub const FLOW_REGION_DIM: usize =
    2 * (2 * EYE_SIZE.0 * EYE_SIZE.1 + NOSE_SIZE.0 * NOSE_SIZE.1 + MOUTH_SIZE.0 * MOUTH_SIZE.1);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionLayout {
    pub left_eye: BoundingBox,
    pub right_eye: BoundingBox,
    pub nose: BoundingBox,
    pub mouth: BoundingBox,
}

impl RegionLayout {
    /// Derives the region boxes from the eye centers. The nose box is
    /// d x d centered at midpoint + (0, 0.6d), the mouth box 1.5d x 0.8d
    /// centered at midpoint + (0, 1.1d), with d the interocular distance.
    pub fn from_eye_centers(
        left: (f64, f64),
        right: (f64, f64),
        left_eye_box: BoundingBox,
        right_eye_box: BoundingBox,
    ) -> Result<Self> {
        let d = ((right.0 - left.0).powi(2) + (right.1 - left.1).powi(2)).sqrt();
        if d <= 0.0 {
            return Err(Error::DegenerateGeometry(
                "coincident eye centers in region layout".into(),
            ));
        }
        let mid = ((left.0 + right.0) / 2.0, (left.1 + right.1) / 2.0);
        let nose = BoundingBox::new(mid.0 - d / 2.0, mid.1 + 0.6 * d - d / 2.0, d, d)?;
        let mouth = BoundingBox::new(
            mid.0 - 0.75 * d,
            mid.1 + 1.1 * d - 0.4 * d,
            1.5 * d,
            0.8 * d,
        )?;
        Ok(RegionLayout {
            left_eye: left_eye_box,
            right_eye: right_eye_box,
            nose,
            mouth,
        })
    }
}

/// Concatenates the bilinearly resampled (dx, dy) values of the four
/// regions in fixed order: left eye, right eye, nose, mouth. Values are
/// interleaved per pixel as dx, dy.
pub fn extract_flow_regions(flow: &FlowField, layout: &RegionLayout) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(FLOW_REGION_DIM);
    for (bx, (rw, rh)) in [
        (&layout.left_eye, EYE_SIZE),
        (&layout.right_eye, EYE_SIZE),
        (&layout.nose, NOSE_SIZE),
        (&layout.mouth, MOUTH_SIZE),
    ] {
        let clamped = clamp_box(bx, flow.width(), flow.height())?;
        sample_region(&flow.dx, &flow.dy, &clamped, rw, rh, &mut out);
    }
    Ok(out)
}

fn clamp_box(bx: &BoundingBox, w: usize, h: usize) -> Result<BoundingBox> {
    let x0 = bx.x.max(0.0);
    let y0 = bx.y.max(0.0);
    let x1 = (bx.x + bx.w).min(w as f64);
    let y1 = (bx.y + bx.h).min(h as f64);
    if x1 - x0 <= 0.0 || y1 - y0 <= 0.0 {
        return Err(Error::DegenerateGeometry(format!(
            "region box ({:.1},{:.1},{:.1},{:.1}) has zero area after clamping to {w}x{h}",
            bx.x, bx.y, bx.w, bx.h
        )));
    }
    BoundingBox::new(x0, y0, x1 - x0, y1 - y0)
}

fn sample_region(
    dx: &Plane,
    dy: &Plane,
    bx: &BoundingBox,
    rw: usize,
    rh: usize,
    out: &mut Vec<f64>,
) {
    for ry in 0..rh {
        for rx in 0..rw {
            let u = bx.x + (rx as f64 + 0.5) / rw as f64 * bx.w - 0.5;
            let v = bx.y + (ry as f64 + 0.5) / rh as f64 * bx.h - 0.5;
            out.push(dx.sample_bilinear(u, v));
            out.push(dy.sample_bilinear(u, v));
        }
    }
}
