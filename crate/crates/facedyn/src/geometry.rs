//! Bounding boxes and 2D affine transforms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates, top-left origin. May extend
/// beyond the frame; samplers clamp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if w <= 0.0 || h <= 0.0 {
            return Err(Error::Invalid(format!(
                "bounding box must have positive size, got {w}x{h}"
            )));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn corners(&self) -> [(f64, f64); 4] {
        [
            (self.x, self.y),
            (self.x + self.w, self.y),
            (self.x + self.w, self.y + self.h),
            (self.x, self.y + self.h),
        ]
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.x + other.w <= self.x + self.w
            && other.y + other.h <= self.y + self.h
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x && x < self.x + self.w && y >= self.y && y < self.y + self.h
    }

    /// Smallest axis-aligned box containing the given points.
    pub fn hull(points: &[(f64, f64)]) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("hull of empty point set".into()));
        }
        let (mut x0, mut y0) = points[0];
        let (mut x1, mut y1) = points[0];
        for &(x, y) in points {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        BoundingBox::new(x0, y0, (x1 - x0).max(1e-9), (y1 - y0).max(1e-9))
    }
}

/// 2x3 affine transform `[a b tx; c d ty]` mapping source coordinates to
/// destination coordinates: `(x', y') = (a x + b y + tx, c x + d y + ty)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineTransform {
    pub a: f64,
    pub b: f64,
    pub tx: f64,
    pub c: f64,
    pub d: f64,
    pub ty: f64,
}

impl AffineTransform {
    pub fn identity() -> Self {
        AffineTransform {
            a: 1.0,
            b: 0.0,
            tx: 0.0,
            c: 0.0,
            d: 1.0,
            ty: 0.0,
        }
    }

    pub fn translation(tx: f64, ty: f64) -> Self {
        AffineTransform {
            a: 1.0,
            b: 0.0,
            tx,
            c: 0.0,
            d: 1.0,
            ty,
        }
    }

    /// Rotation by `theta` radians about `(cx, cy)`, optionally scaled by `s`.
    pub fn rotation_about(theta: f64, cx: f64, cy: f64, s: f64) -> Self {
        let (sin, cos) = theta.sin_cos();
        let a = s * cos;
        let b = -s * sin;
        let c = s * sin;
        let d = s * cos;
        AffineTransform {
            a,
            b,
            tx: cx - a * cx - b * cy,
            c,
            d,
            ty: cy - c * cx - d * cy,
        }
    }

    /// Similarity transform mapping the pair `(p0, p1)` onto `(q0, q1)`.
    /// Rotation + uniform scale + translation, no shear.
    pub fn similarity_from_pairs(
        p0: (f64, f64),
        p1: (f64, f64),
        q0: (f64, f64),
        q1: (f64, f64),
    ) -> Result<Self> {
        // Complex-number form: z' = alpha z + beta.
        let (dx, dy) = (p1.0 - p0.0, p1.1 - p0.1);
        let denom = dx * dx + dy * dy;
        if denom < 1e-18 {
            return Err(Error::DegenerateGeometry(
                "similarity from coincident source points".into(),
            ));
        }
        let (ex, ey) = (q1.0 - q0.0, q1.1 - q0.1);
        let ar = (ex * dx + ey * dy) / denom;
        let ai = (ey * dx - ex * dy) / denom;
        Ok(AffineTransform {
            a: ar,
            b: -ai,
            tx: q0.0 - (ar * p0.0 - ai * p0.1),
            c: ai,
            d: ar,
            ty: q0.1 - (ai * p0.0 + ar * p0.1),
        })
    }

    pub fn apply(&self, x: f64, y: f64) -> (f64, f64) {
        (
            self.a * x + self.b * y + self.tx,
            self.c * x + self.d * y + self.ty,
        )
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn invert(&self) -> Result<Self> {
        let det = self.det();
        if det.abs() < 1e-12 {
            return Err(Error::SingularTransform { det });
        }
        let a = self.d / det;
        let b = -self.b / det;
        let c = -self.c / det;
        let d = self.a / det;
        Ok(AffineTransform {
            a,
            b,
            tx: -(a * self.tx + b * self.ty),
            c,
            d,
            ty: -(c * self.tx + d * self.ty),
        })
    }

    /// `self ∘ other`: applies `other` first, then `self`.
    pub fn compose(&self, other: &AffineTransform) -> Self {
        AffineTransform {
            a: self.a * other.a + self.b * other.c,
            b: self.a * other.b + self.b * other.d,
            tx: self.a * other.tx + self.b * other.ty + self.tx,
            c: self.c * other.a + self.d * other.c,
            d: self.c * other.b + self.d * other.d,
            ty: self.c * other.tx + self.d * other.ty + self.ty,
        }
    }

    /// Rotation angle of the linear part, `atan2(c, a)`.
    pub fn rotation_angle(&self) -> f64 {
        self.c.atan2(self.a)
    }

    /// Uniform scale of the linear part (exact for similarities).
    pub fn uniform_scale(&self) -> f64 {
        (self.a * self.a + self.c * self.c).sqrt()
    }

    pub fn max_abs_diff(&self, other: &AffineTransform) -> f64 {
        [
            self.a - other.a,
            self.b - other.b,
            self.c - other.c,
            self.d - other.d,
            self.tx - other.tx,
            self.ty - other.ty,
        ]
        .iter()
        .fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn invert_roundtrip() {
        let t = AffineTransform {
            a: 1.2,
            b: -0.3,
            tx: 4.0,
            c: 0.5,
            d: 0.9,
            ty: -2.0,
        };
        let inv = t.invert().unwrap();
        let id = t.compose(&inv);
        assert!(id.max_abs_diff(&AffineTransform::identity()) < 1e-12);
    }

    #[test]
    fn singular_rejected() {
        let t = AffineTransform {
            a: 1.0,
            b: 2.0,
            tx: 0.0,
            c: 2.0,
            d: 4.0,
            ty: 0.0,
        };
        assert!(matches!(t.invert(), Err(Error::SingularTransform { .. })));
    }

    #[test]
    fn similarity_maps_pairs_exactly() {
        let t = AffineTransform::similarity_from_pairs(
            (1.0, 2.0),
            (4.0, 2.0),
            (10.0, 10.0),
            (10.0, 16.0),
        )
        .unwrap();
        let q0 = t.apply(1.0, 2.0);
        let q1 = t.apply(4.0, 2.0);
        assert!((q0.0 - 10.0).abs() < 1e-12 && (q0.1 - 10.0).abs() < 1e-12);
        assert!((q1.0 - 10.0).abs() < 1e-12 && (q1.1 - 16.0).abs() < 1e-12);
        // No shear: linear part is a scaled rotation.
        assert!((t.a - t.d).abs() < 1e-12 && (t.b + t.c).abs() < 1e-12);
    }

    #[test]
    fn rotation_angle_of_pure_scale_is_zero() {
        let t = AffineTransform {
            a: 2.0,
            b: 0.0,
            tx: 0.0,
            c: 0.0,
            d: 2.0,
            ty: 0.0,
        };
        assert_eq!(t.rotation_angle(), 0.0);
    }
}
