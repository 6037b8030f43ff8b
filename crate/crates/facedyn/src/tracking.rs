//! KLT tracking: Shi-Tomasi feature selection, pyramidal Lucas-Kanade
//! tracking, robust affine fitting, and box propagation across a video.

use crate::error::{Error, Result};
use crate::filter::{downsample2_frame, gaussian_blur, sobel_gradients, Plane};
use crate::frame::{Frame, VideoSequence};
use crate::geometry::{AffineTransform, BoundingBox};

const DETECT_QUALITY: f64 = 0.01;
const DETECT_MIN_DISTANCE: f64 = 5.0;
const DETECT_GAUSS_SIGMA: f64 = 1.5;
const DETECT_GAUSS_RADIUS: usize = 3; // 7x7 window

const LK_PYRAMID_LEVELS: usize = 3;
const LK_WINDOW_RADIUS: isize = 7; // 15x15 integration window
const LK_MAX_ITERATIONS: usize = 30;
const LK_CONVERGENCE: f64 = 0.01;
const LK_MAX_CONDITION: f64 = 1e4;
const LK_MAX_RESIDUAL: f64 = 0.1;

const TRACK_MAX_FEATURES: usize = 200;
const TRACK_REDETECT_BELOW: usize = 50;

/// Sparse tracked points with per-point validity.
#[derive(Debug, Clone)]
pub struct TrackedPoints {
    pub positions: Vec<(f64, f64)>,
    pub status: Vec<bool>,
}

impl TrackedPoints {
    pub fn valid_count(&self) -> usize {
        self.status.iter().filter(|&&s| s).count()
    }
}

/// Per-frame tracking state: warped face-box corners, eye centers, and
/// the frame-to-frame and cumulative transforms.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrackFrame {
    pub face_corners: [(f64, f64); 4],
    pub left_eye: (f64, f64),
    pub right_eye: (f64, f64),
    pub frame_transform: AffineTransform,
    pub cumulative_transform: AffineTransform,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct TrackResult {
    pub frames: Vec<TrackFrame>,
}

impl TrackFrame {
    pub fn face_center(&self) -> (f64, f64) {
        let sx: f64 = self.face_corners.iter().map(|c| c.0).sum();
        let sy: f64 = self.face_corners.iter().map(|c| c.1).sum();
        (sx / 4.0, sy / 4.0)
    }
}

/// Shi-Tomasi corners inside `bbox`: minimum eigenvalue of the Gaussian
/// smoothed structure tensor, thresholded relative to the strongest
/// response, greedily non-maximum suppressed, strongest first.
pub fn detect_features(frame: &Frame, bbox: &BoundingBox, max_n: usize) -> Result<TrackedPoints> {
    let x0 = bbox.x.max(0.0).floor() as usize;
    let y0 = bbox.y.max(0.0).floor() as usize;
    let x1 = (bbox.x + bbox.w).min(frame.width() as f64).ceil() as usize;
    let y1 = (bbox.y + bbox.h).min(frame.height() as f64).ceil() as usize;
    if x0 >= x1 || y0 >= y1 {
        return Err(Error::Invalid(format!(
            "box ({:.0},{:.0},{:.0},{:.0}) does not intersect {}x{} frame",
            bbox.x,
            bbox.y,
            bbox.w,
            bbox.h,
            frame.width(),
            frame.height()
        )));
    }

    let plane = Plane::from_frame(frame);
    let (gx, gy) = sobel_gradients(&plane);
    let mut gxx = Plane::zeros(plane.width, plane.height);
    let mut gxy = Plane::zeros(plane.width, plane.height);
    let mut gyy = Plane::zeros(plane.width, plane.height);
    for i in 0..plane.data.len() {
        gxx.data[i] = gx.data[i] * gx.data[i];
        gxy.data[i] = gx.data[i] * gy.data[i];
        gyy.data[i] = gy.data[i] * gy.data[i];
    }
    let gxx = gaussian_blur(&gxx, DETECT_GAUSS_SIGMA, DETECT_GAUSS_RADIUS);
    let gxy = gaussian_blur(&gxy, DETECT_GAUSS_SIGMA, DETECT_GAUSS_RADIUS);
    let gyy = gaussian_blur(&gyy, DETECT_GAUSS_SIGMA, DETECT_GAUSS_RADIUS);

    let mut response = Plane::zeros(plane.width, plane.height);
    for y in 0..plane.height {
        for x in 0..plane.width {
            let a = gxx.get(x, y);
            let b = gxy.get(x, y);
            let c = gyy.get(x, y);
            response.set(x, y, 0.5 * ((a + c) - ((a - c) * (a - c) + 4.0 * b * b).sqrt()));
        }
    }
    // Keep only 3x3 local maxima: response decays smoothly away from a
    // corner, so this discards the halo around each true peak.
    let mut candidates: Vec<(f64, usize, usize)> = Vec::new();
    for y in y0..y1 {
        for x in x0..x1 {
            let v = response.get(x, y);
            if v <= 0.0 {
                continue;
            }
            let mut is_max = true;
            'nbr: for dy in -1..=1isize {
                for dx in -1..=1isize {
                    if (dx, dy) != (0, 0)
                        && response.get_clamped(x as isize + dx, y as isize + dy) > v
                    {
                        is_max = false;
                        break 'nbr;
                    }
                }
            }
            if is_max {
                candidates.push((v, x, y));
            }
        }
    }
    if candidates.is_empty() {
        return Ok(TrackedPoints {
            positions: Vec::new(),
            status: Vec::new(),
        });
    }
    let max_response = candidates
        .iter()
        .map(|c| c.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let threshold = DETECT_QUALITY * max_response;
    candidates.retain(|c| c.0 >= threshold);
    // Deterministic ordering: response descending, position as tiebreak.
    candidates.sort_by(|p, q| {
        q.0.partial_cmp(&p.0)
            .unwrap()
            .then(p.2.cmp(&q.2))
            .then(p.1.cmp(&q.1))
    });

    let min_d2 = DETECT_MIN_DISTANCE * DETECT_MIN_DISTANCE;
    let mut positions: Vec<(f64, f64)> = Vec::new();
    for (_, x, y) in candidates {
        let p = (x as f64, y as f64);
        if positions
            .iter()
            .all(|q| (q.0 - p.0).powi(2) + (q.1 - p.1).powi(2) >= min_d2)
        {
            positions.push(p);
            if positions.len() == max_n {
                break;
            }
        }
    }
    let status = vec![true; positions.len()];
    Ok(TrackedPoints { positions, status })
}

struct PointTrack {
    position: (f64, f64),
    valid: bool,
}

fn window_inside(frame_w: usize, frame_h: usize, p: (f64, f64)) -> bool {
    let r = LK_WINDOW_RADIUS as f64 + 1.0;
    p.0 - r >= 0.0
        && p.1 - r >= 0.0
        && p.0 + r <= frame_w as f64 - 1.0
        && p.1 + r <= frame_h as f64 - 1.0
}

fn track_point(prev_pyr: &[Plane], next_pyr: &[Plane], start: (f64, f64)) -> PointTrack {
    let levels = prev_pyr.len();
    let mut guess = (0.0f64, 0.0f64);
    let mut lost = false;
    let mut final_residual = 0.0;

    for level in (0..levels).rev() {
        let prev = &prev_pyr[level];
        let next = &next_pyr[level];
        let scale = (1 << level) as f64;
        let p = (start.0 / scale, start.1 / scale);

        // Template gradients and window samples from the previous frame.
        let n_win = ((2 * LK_WINDOW_RADIUS + 1) * (2 * LK_WINDOW_RADIUS + 1)) as usize;
        let mut tmpl = Vec::with_capacity(n_win);
        let mut ix = Vec::with_capacity(n_win);
        let mut iy = Vec::with_capacity(n_win);
        let mut g11 = 0.0;
        let mut g12 = 0.0;
        let mut g22 = 0.0;
        for dy in -LK_WINDOW_RADIUS..=LK_WINDOW_RADIUS {
            for dx in -LK_WINDOW_RADIUS..=LK_WINDOW_RADIUS {
                let qx = p.0 + dx as f64;
                let qy = p.1 + dy as f64;
                tmpl.push(prev.sample_bilinear(qx, qy));
                let gx = (prev.sample_bilinear(qx + 1.0, qy) - prev.sample_bilinear(qx - 1.0, qy))
                    / 2.0;
                let gy = (prev.sample_bilinear(qx, qy + 1.0) - prev.sample_bilinear(qx, qy - 1.0))
                    / 2.0;
                ix.push(gx);
                iy.push(gy);
                g11 += gx * gx;
                g12 += gx * gy;
                g22 += gy * gy;
            }
        }
        let det = g11 * g22 - g12 * g12;
        let trace = g11 + g22;
        let disc = (trace * trace - 4.0 * det).max(0.0).sqrt();
        let eig_max = 0.5 * (trace + disc);
        let eig_min = 0.5 * (trace - disc);
        if eig_min <= 0.0 || eig_max / eig_min > LK_MAX_CONDITION {
            if level == 0 {
                lost = true;
            }
            // Gradient too weak to refine at this level: keep the guess.
            if level > 0 {
                guess = (guess.0 * 2.0, guess.1 * 2.0);
            }
            continue;
        }

        let mut nu = (0.0f64, 0.0f64);
        let mut residual = 0.0;
        for _ in 0..LK_MAX_ITERATIONS {
            let mut b1 = 0.0;
            let mut b2 = 0.0;
            residual = 0.0;
            let mut k = 0;
            for dy in -LK_WINDOW_RADIUS..=LK_WINDOW_RADIUS {
                for dx in -LK_WINDOW_RADIUS..=LK_WINDOW_RADIUS {
                    let qx = p.0 + guess.0 + nu.0 + dx as f64;
                    let qy = p.1 + guess.1 + nu.1 + dy as f64;
                    let diff = tmpl[k] - next.sample_bilinear(qx, qy);
                    b1 += diff * ix[k];
                    b2 += diff * iy[k];
                    residual += diff.abs();
                    k += 1;
                }
            }
            let d1 = (g22 * b1 - g12 * b2) / det;
            let d2 = (g11 * b2 - g12 * b1) / det;
            nu.0 += d1;
            nu.1 += d2;
            if (d1 * d1 + d2 * d2).sqrt() < LK_CONVERGENCE {
                break;
            }
        }
        residual /= n_win as f64;
        if level == 0 {
            final_residual = residual;
            guess = (guess.0 + nu.0, guess.1 + nu.1);
        } else {
            guess = ((guess.0 + nu.0) * 2.0, (guess.1 + nu.1) * 2.0);
        }
    }

    let new_pos = (start.0 + guess.0, start.1 + guess.1);
    let (w, h) = (prev_pyr[0].width, prev_pyr[0].height);
    let inside = new_pos.0 >= 0.0
        && new_pos.1 >= 0.0
        && new_pos.0 <= (w - 1) as f64
        && new_pos.1 <= (h - 1) as f64
        && window_inside(w, h, start)
        && window_inside(w, h, new_pos);
    PointTrack {
        position: new_pos,
        valid: !lost && inside && final_residual <= LK_MAX_RESIDUAL,
    }
}

fn build_pyramid_levels(frame: &Frame, levels: usize) -> Result<Vec<Plane>> {
    let mut pyr = vec![Plane::from_frame(frame)];
    let mut current = frame.clone();
    for _ in 1..levels {
        current = downsample2_frame(&current)?;
        pyr.push(Plane::from_frame(&current));
    }
    Ok(pyr)
}

/// Pyramidal Lucas-Kanade from `prev` to `next` for each input point.
/// Points already marked invalid stay invalid.
pub fn lk_track(prev: &Frame, next: &Frame, pts: &TrackedPoints) -> Result<TrackedPoints> {
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(Error::Dimension(format!(
            "lk_track frames differ: {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }
    if pts.positions.is_empty() {
        return Err(Error::Invalid("lk_track needs at least one point".into()));
    }
    let prev_pyr = build_pyramid_levels(prev, LK_PYRAMID_LEVELS)?;
    let next_pyr = build_pyramid_levels(next, LK_PYRAMID_LEVELS)?;

    let mut positions = Vec::with_capacity(pts.positions.len());
    let mut status = Vec::with_capacity(pts.positions.len());
    for (i, &p) in pts.positions.iter().enumerate() {
        if !pts.status[i] {
            positions.push(p);
            status.push(false);
            continue;
        }
        let tracked = track_point(&prev_pyr, &next_pyr, p);
        positions.push(tracked.position);
        status.push(tracked.valid);
    }
    Ok(TrackedPoints { positions, status })
}

/// Least-squares affine fit with one robust trimming pass: pairs with
/// residual above 3x the median are dropped and the fit repeated.
pub fn estimate_affine(old_pts: &[(f64, f64)], new_pts: &[(f64, f64)]) -> Result<AffineTransform> {
    if old_pts.len() != new_pts.len() {
        return Err(Error::Dimension(
            "estimate_affine point lists differ in length".into(),
        ));
    }
    let first = fit_affine(old_pts, new_pts)?;
    let mut residuals: Vec<f64> = old_pts
        .iter()
        .zip(new_pts)
        .map(|(&p, &q)| {
            let (px, py) = first.apply(p.0, p.1);
            ((px - q.0).powi(2) + (py - q.1).powi(2)).sqrt()
        })
        .collect();
    let mut sorted = residuals.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = sorted[sorted.len() / 2];
    if median < 1e-9 {
        return Ok(first);
    }
    let threshold = 3.0 * median;
    let mut kept_old = Vec::new();
    let mut kept_new = Vec::new();
    for (i, r) in residuals.drain(..).enumerate() {
        if r <= threshold {
            kept_old.push(old_pts[i]);
            kept_new.push(new_pts[i]);
        }
    }
    if kept_old.len() < 3 {
        return Ok(first);
    }
    fit_affine(&kept_old, &kept_new).or(Ok(first))
}

fn fit_affine(old_pts: &[(f64, f64)], new_pts: &[(f64, f64)]) -> Result<AffineTransform> {
    let n = old_pts.len();
    if n < 3 {
        return Err(Error::DegenerateGeometry(format!(
            "affine fit needs >= 3 pairs, got {n}"
        )));
    }
    // Collinearity check on the source configuration.
    let mx = old_pts.iter().map(|p| p.0).sum::<f64>() / n as f64;
    let my = old_pts.iter().map(|p| p.1).sum::<f64>() / n as f64;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &(x, y) in old_pts {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let cov_det = sxx * syy - sxy * sxy;
    if cov_det <= 1e-9 * (sxx + syy).powi(2).max(1e-12) {
        return Err(Error::DegenerateGeometry(
            "collinear point configuration".into(),
        ));
    }

    // Shared 3x3 normal matrix for both coordinate rows.
    let mut m = nalgebra::Matrix3::zeros();
    let mut rhs_x = nalgebra::Vector3::zeros();
    let mut rhs_y = nalgebra::Vector3::zeros();
    for (&(x, y), &(xp, yp)) in old_pts.iter().zip(new_pts) {
        let v = nalgebra::Vector3::new(x, y, 1.0);
        m += v * v.transpose();
        rhs_x += v * xp;
        rhs_y += v * yp;
    }
    let inv = m
        .try_inverse()
        .ok_or_else(|| Error::DegenerateGeometry("singular affine normal matrix".into()))?;
    let row_x = inv * rhs_x;
    let row_y = inv * rhs_y;
    Ok(AffineTransform {
        a: row_x[0],
        b: row_x[1],
        tx: row_x[2],
        c: row_y[0],
        d: row_y[1],
        ty: row_y[2],
    })
}

/// Tracks the face box and eye centers through the video: detect in frame
/// 0, track frame to frame, fit an affine per step, compose, and warp the
/// frame-0 geometry. Features are re-detected inside the warped box when
/// fewer than 50 survive.
pub fn track_sequence(
    video: &VideoSequence,
    face_box: &BoundingBox,
    left_eye_box: &BoundingBox,
    right_eye_box: &BoundingBox,
) -> Result<TrackResult> {
    let initial_corners = face_box.corners();
    let left_eye0 = left_eye_box.center();
    let right_eye0 = right_eye_box.center();

    let mut pts = detect_features(&video.frames()[0], face_box, TRACK_MAX_FEATURES)?;
    if pts.valid_count() < 3 {
        return Err(Error::TrackingLost {
            frame: 0,
            reason: format!("only {} features in initial face box", pts.valid_count()),
        });
    }

    let mut cumulative = AffineTransform::identity();
    let mut frames = vec![TrackFrame {
        face_corners: initial_corners,
        left_eye: left_eye0,
        right_eye: right_eye0,
        frame_transform: AffineTransform::identity(),
        cumulative_transform: cumulative,
    }];

    for t in 1..video.len() {
        let tracked = lk_track(&video.frames()[t - 1], &video.frames()[t], &pts)?;
        let mut old = Vec::new();
        let mut new = Vec::new();
        for i in 0..tracked.positions.len() {
            if tracked.status[i] {
                old.push(pts.positions[i]);
                new.push(tracked.positions[i]);
            }
        }
        if old.len() < 3 {
            return Err(Error::TrackingLost {
                frame: t,
                reason: format!("{} surviving points", old.len()),
            });
        }
        let frame_transform = estimate_affine(&old, &new)?;
        cumulative = frame_transform.compose(&cumulative);

        let face_corners = initial_corners.map(|(x, y)| cumulative.apply(x, y));
        frames.push(TrackFrame {
            face_corners,
            left_eye: cumulative.apply(left_eye0.0, left_eye0.1),
            right_eye: cumulative.apply(right_eye0.0, right_eye0.1),
            frame_transform,
            cumulative_transform: cumulative,
        });

        pts = TrackedPoints {
            positions: new,
            status: vec![true; old.len()],
        };
        if pts.valid_count() < TRACK_REDETECT_BELOW {
            let current_box = BoundingBox::hull(&face_corners)?;
            let redetected = detect_features(&video.frames()[t], &current_box, TRACK_MAX_FEATURES);
            match redetected {
                Ok(p) if p.valid_count() >= 3 => pts = p,
                _ => {
                    if pts.valid_count() < 3 {
                        return Err(Error::TrackingLost {
                            frame: t,
                            reason: "re-detection found fewer than 3 points".into(),
                        });
                    }
                }
            }
        }
    }
    Ok(TrackResult { frames })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_box(w: usize, h: usize) -> BoundingBox {
        BoundingBox::new(0.0, 0.0, w as f64, h as f64).unwrap()
    }

    fn smooth_texture(n: usize, shift_x: f64, shift_y: f64) -> Frame {
        Frame::from_fn(n, n, |x, y| {
            let x = x as f64 - shift_x;
            let y = y as f64 - shift_y;
            let v = 0.5
                + 0.17 * (0.29 * x + 0.23 * y).sin()
                + 0.13 * (0.41 * x - 0.31 * y).cos()
                + 0.11 * ((0.13 * x).sin() * (0.37 * y).cos());
            v.clamp(0.02, 0.98) as f32
        })
    }

    #[test]
    fn constant_frame_has_no_features() {
        let frame = Frame::constant(64, 64, 0.5);
        let pts = detect_features(&frame, &full_box(64, 64), 100).unwrap();
        assert!(pts.positions.is_empty());
    }

    #[test]
    fn checkerboard_corners_detected() {
        // 8x8 checkerboard of 16-px squares; interior corners on the
        // 16-px grid.
        let frame = Frame::from_fn(128, 128, |x, y| {
            if (x / 16 + y / 16) % 2 == 0 {
                0.9
            } else {
                0.1
            }
        });
        let pts = detect_features(&frame, &full_box(128, 128), 100).unwrap();
        assert!(pts.positions.len() >= 30, "{} corners", pts.positions.len());
        for &(x, y) in &pts.positions {
            let nearest_x = (x / 16.0).round() * 16.0;
            let nearest_y = (y / 16.0).round() * 16.0;
            let d = ((x - nearest_x).powi(2) + (y - nearest_y).powi(2)).sqrt();
            assert!(d <= 1.5, "({x},{y}) is {d} px from grid");
        }
    }

    #[test]
    fn max_n_truncates_to_strongest() {
        let frame = Frame::from_fn(128, 128, |x, y| {
            if (x / 16 + y / 16) % 2 == 0 {
                0.9
            } else {
                0.1
            }
        });
        let all = detect_features(&frame, &full_box(128, 128), 100).unwrap();
        let five = detect_features(&frame, &full_box(128, 128), 5).unwrap();
        assert_eq!(five.positions.len(), 5);
        assert_eq!(&all.positions[..5], &five.positions[..]);
    }

    #[test]
    fn detect_outside_frame_errors() {
        let frame = Frame::constant(32, 32, 0.5);
        let bx = BoundingBox::new(100.0, 100.0, 10.0, 10.0).unwrap();
        assert!(detect_features(&frame, &bx, 10).is_err());
    }

    #[test]
    fn detect_is_deterministic() {
        let frame = smooth_texture(96, 0.0, 0.0);
        let a = detect_features(&frame, &full_box(96, 96), 50).unwrap();
        let b = detect_features(&frame, &full_box(96, 96), 50).unwrap();
        assert_eq!(a.positions, b.positions);
    }

    #[test]
    fn lk_identical_frames_keeps_points() {
        let frame = smooth_texture(96, 0.0, 0.0);
        let pts = detect_features(&frame, &full_box(96, 96), 30).unwrap();
        let tracked = lk_track(&frame, &frame, &pts).unwrap();
        for i in 0..pts.positions.len() {
            if tracked.status[i] {
                let d = ((tracked.positions[i].0 - pts.positions[i].0).powi(2)
                    + (tracked.positions[i].1 - pts.positions[i].1).powi(2))
                .sqrt();
                assert!(d < 1e-6, "point {i} moved {d}");
            }
        }
        assert!(tracked.valid_count() > 0);
    }

    #[test]
    fn lk_recovers_known_translation() {
        let a = smooth_texture(96, 0.0, 0.0);
        let b = smooth_texture(96, 3.0, 2.0);
        let bx = BoundingBox::new(20.0, 20.0, 56.0, 56.0).unwrap();
        let pts = detect_features(&a, &bx, 40).unwrap();
        assert!(pts.positions.len() >= 5);
        let tracked = lk_track(&a, &b, &pts).unwrap();
        let mut sum = (0.0, 0.0);
        let mut n = 0;
        for i in 0..pts.positions.len() {
            if tracked.status[i] {
                sum.0 += tracked.positions[i].0 - pts.positions[i].0;
                sum.1 += tracked.positions[i].1 - pts.positions[i].1;
                n += 1;
            }
        }
        assert!(n > 0);
        let mean = (sum.0 / n as f64, sum.1 / n as f64);
        assert!(
            (mean.0 - 3.0).abs() < 0.1 && (mean.1 - 2.0).abs() < 0.1,
            "mean displacement {mean:?}"
        );
    }

    #[test]
    fn point_near_border_is_lost() {
        let a = smooth_texture(64, 0.0, 0.0);
        let b = smooth_texture(64, 3.0, 2.0);
        let pts = TrackedPoints {
            positions: vec![(2.0, 2.0)],
            status: vec![true],
        };
        let tracked = lk_track(&a, &b, &pts).unwrap();
        assert!(!tracked.status[0]);
    }

    #[test]
    fn affine_identity_and_translation() {
        let pts: Vec<(f64, f64)> = (0..10)
            .map(|i| ((i % 4) as f64 * 7.0, (i / 4) as f64 * 5.0 + (i % 3) as f64))
            .collect();
        let t = estimate_affine(&pts, &pts).unwrap();
        assert!(t.max_abs_diff(&AffineTransform::identity()) < 1e-9);

        let moved: Vec<(f64, f64)> = pts.iter().map(|&(x, y)| (x + 4.0, y - 2.0)).collect();
        let t = estimate_affine(&pts, &moved).unwrap();
        assert!(t.max_abs_diff(&AffineTransform::translation(4.0, -2.0)) < 1e-9);
    }

    #[test]
    fn affine_robust_to_planted_outliers() {
        let theta: f64 = 30f64.to_radians();
        let truth = AffineTransform::rotation_about(theta, 0.0, 0.0, 1.0);
        let old: Vec<(f64, f64)> = (0..20)
            .map(|i| {
                let a = i as f64 * 0.7;
                (10.0 * a.cos() + i as f64, 8.0 * a.sin() - i as f64 * 0.5)
            })
            .collect();
        let mut new: Vec<(f64, f64)> = old.iter().map(|&(x, y)| truth.apply(x, y)).collect();
        new[3].0 += 50.0;
        new[11].1 -= 50.0;
        let fitted = estimate_affine(&old, &new).unwrap();
        assert!(
            (fitted.a - truth.a).abs() < 1e-3
                && (fitted.b - truth.b).abs() < 1e-3
                && (fitted.c - truth.c).abs() < 1e-3
                && (fitted.d - truth.d).abs() < 1e-3,
            "{fitted:?} vs {truth:?}"
        );
    }

    #[test]
    fn affine_collinear_rejected() {
        let old: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, 2.0 * i as f64)).collect();
        assert!(matches!(
            estimate_affine(&old, &old),
            Err(Error::DegenerateGeometry(_))
        ));
    }

    fn face_boxes() -> (BoundingBox, BoundingBox, BoundingBox) {
        (
            BoundingBox::new(16.0, 16.0, 64.0, 64.0).unwrap(),
            BoundingBox::new(28.0, 36.0, 12.0, 8.0).unwrap(),
            BoundingBox::new(56.0, 36.0, 12.0, 8.0).unwrap(),
        )
    }

    #[test]
    fn static_video_tracks_identity() {
        let frame = smooth_texture(96, 0.0, 0.0);
        let video = VideoSequence::new(vec![frame; 10], 50.0).unwrap();
        let (face, le, re) = face_boxes();
        let result = track_sequence(&video, &face, &le, &re).unwrap();
        assert_eq!(result.frames.len(), 10);
        for tf in &result.frames {
            assert!(
                tf.cumulative_transform
                    .max_abs_diff(&AffineTransform::identity())
                    < 1e-6
            );
        }
    }

    #[test]
    fn translating_video_tracks_box() {
        let frames: Vec<Frame> = (0..20).map(|t| smooth_texture(128, t as f64, 0.0)).collect();
        let video = VideoSequence::new(frames, 50.0).unwrap();
        let face = BoundingBox::new(20.0, 30.0, 60.0, 60.0).unwrap();
        let le = BoundingBox::new(32.0, 48.0, 12.0, 8.0).unwrap();
        let re = BoundingBox::new(56.0, 48.0, 12.0, 8.0).unwrap();
        let result = track_sequence(&video, &face, &le, &re).unwrap();
        let last = &result.frames[19];
        for (i, &(x, y)) in last.face_corners.iter().enumerate() {
            let (ex, ey) = face.corners()[i];
            let d = ((x - ex - 19.0).powi(2) + (y - ey).powi(2)).sqrt();
            assert!(d < 0.5, "corner {i} off by {d}");
        }
    }

    #[test]
    fn palindromic_video_returns_to_start() {
        let a = smooth_texture(96, 0.0, 0.0);
        let b = smooth_texture(96, 2.0, 1.0);
        let video = VideoSequence::new(vec![a.clone(), b, a], 50.0).unwrap();
        let (face, le, re) = face_boxes();
        let result = track_sequence(&video, &face, &le, &re).unwrap();
        let last = result.frames.last().unwrap();
        for (i, &(x, y)) in last.face_corners.iter().enumerate() {
            let (ex, ey) = face.corners()[i];
            let d = ((x - ex).powi(2) + (y - ey).powi(2)).sqrt();
            assert!(d < 0.5, "corner {i} off by {d}");
        }
    }

    #[test]
    fn subject_leaving_frame_reports_frame_index() {
        // Texture translates 30 px/frame; by frame 3 every tracked window
        // has left the frame.
        let frames: Vec<Frame> = (0..8)
            .map(|t| {
                if t < 3 {
                    smooth_texture(64, t as f64 * 30.0, 0.0)
                } else {
                    Frame::constant(64, 64, 0.5)
                }
            })
            .collect();
        let video = VideoSequence::new(frames, 50.0).unwrap();
        let face = BoundingBox::new(4.0, 4.0, 56.0, 56.0).unwrap();
        let le = BoundingBox::new(16.0, 20.0, 10.0, 6.0).unwrap();
        let re = BoundingBox::new(38.0, 20.0, 10.0, 6.0).unwrap();
        match track_sequence(&video, &face, &le, &re) {
            Err(Error::TrackingLost { frame, .. }) => assert!(frame >= 1 && frame <= 4, "{frame}"),
            other => panic!("expected tracking loss, got {other:?}"),
        }
    }

    #[test]
    fn cumulative_is_product_of_frame_transforms() {
        let frames: Vec<Frame> = (0..8).map(|t| smooth_texture(96, t as f64 * 0.8, 0.3 * t as f64)).collect();
        let video = VideoSequence::new(frames, 50.0).unwrap();
        let (face, le, re) = face_boxes();
        let result = track_sequence(&video, &face, &le, &re).unwrap();
        let mut product = AffineTransform::identity();
        for tf in &result.frames {
            product = tf.frame_transform.compose(&product);
            assert!(
                tf.cumulative_transform.max_abs_diff(&product) < 1e-6,
                "cumulative drifted"
            );
        }
    }
}
