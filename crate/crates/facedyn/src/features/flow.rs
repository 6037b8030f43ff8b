//! Dense optical flow by quadratic polynomial expansion, coarse-to-fine
//! over a Gaussian pyramid.

use nalgebra::{Matrix6, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{box_filter, downsample2_frame, resize_bilinear, Plane};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlowParams {
    pub pyramid_levels: usize,
    /// Polynomial expansion window (odd).
    pub poly_n: usize,
    pub poly_sigma: f64,
    /// Refinement passes per pyramid level.
    pub iterations: usize,
    /// Side of the uniform window averaging the per-pixel equations.
    pub avg_window: usize,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            pyramid_levels: 3,
            poly_n: 7,
            poly_sigma: 1.5,
            iterations: 3,
            avg_window: 15,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        if self.pyramid_levels == 0
            || self.poly_n == 0
            || self.iterations == 0
            || self.avg_window == 0
            || !(self.poly_sigma > 0.0)
        {
            return Err(Error::Invalid("flow parameters must be positive".into()));
        }
        if self.poly_n % 2 == 0 {
            return Err(Error::Invalid(format!(
                "poly_n must be odd, got {}",
                self.poly_n
            )));
        }
        Ok(())
    }
}

/// Per-pixel displacement field; `dx`/`dy` give the motion of each pixel
/// from the first frame to the second.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub dx: Plane,
    pub dy: Plane,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            dx: Plane::zeros(width, height),
            dy: Plane::zeros(width, height),
        }
    }

    pub fn width(&self) -> usize {
        self.dx.width
    }

    pub fn height(&self) -> usize {
        self.dx.height
    }

    pub fn mean_magnitude(&self) -> f64 {
        let n = self.dx.data.len() as f64;
        self.dx
            .data
            .iter()
            .zip(&self.dy.data)
            .map(|(&x, &y)| (x * x + y * y).sqrt())
            .sum::<f64>()
            / n
    }
}

/// Quadratic expansion coefficients per pixel: f ~ c + b.x + x'Ax with
/// A = [[a11, a12], [a12, a22]], b = (b1, b2).
struct PolyExpansion {
    b1: Plane,
    b2: Plane,
    a11: Plane,
    a22: Plane,
    a12: Plane,
}

fn poly_expansion(frame: &Plane, n: usize, sigma: f64) -> PolyExpansion {
    let r = (n / 2) as isize;
    let w: Vec<f64> = (-r..=r)
        .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let t_of = |k: usize| (k as isize - r) as f64;

    // 1D moment kernels w(t), w(t)t, w(t)t^2.
    let k0 = w.clone();
    let k1: Vec<f64> = w.iter().enumerate().map(|(k, &v)| v * t_of(k)).collect();
    let k2: Vec<f64> = w
        .iter()
        .enumerate()
        .map(|(k, &v)| v * t_of(k) * t_of(k))
        .collect();

    // Metric G = sum w(x)w(y) b(x,y) b(x,y)^T for basis [1, x, y, x^2, y^2, xy],
    // inverted once; borders reuse it with clamped image sampling.
    let mut g = Matrix6::zeros();
    for dy in -r..=r {
        for dx in -r..=r {
            let ww = w[(dx + r) as usize] * w[(dy + r) as usize];
            let b = Vector6::new(
                1.0,
                dx as f64,
                dy as f64,
                (dx * dx) as f64,
                (dy * dy) as f64,
                (dx * dy) as f64,
            );
            g += ww * b * b.transpose();
        }
    }
    let g_inv = g.try_inverse().expect("expansion metric is positive definite");

    // Separable moments: vertical pass with k0/k1/k2, then horizontal.
    use crate::filter::{correlate_cols, correlate_rows};
    let v0 = correlate_cols(frame, &k0);
    let v1 = correlate_cols(frame, &k1);
    let v2 = correlate_cols(frame, &k2);
    let m00 = correlate_rows(&v0, &k0);
    let m10 = correlate_rows(&v0, &k1);
    let m01 = correlate_rows(&v1, &k0);
    let m20 = correlate_rows(&v0, &k2);
    let m02 = correlate_rows(&v2, &k0);
    let m11 = correlate_rows(&v1, &k1);

    let (width, height) = (frame.width, frame.height);
    let mut out = PolyExpansion {
        b1: Plane::zeros(width, height),
        b2: Plane::zeros(width, height),
        a11: Plane::zeros(width, height),
        a22: Plane::zeros(width, height),
        a12: Plane::zeros(width, height),
    };
    for i in 0..width * height {
        let m = Vector6::new(
            m00.data[i], m10.data[i], m01.data[i], m20.data[i], m02.data[i], m11.data[i],
        );
        let coeff = g_inv * m;
        out.b1.data[i] = coeff[1];
        out.b2.data[i] = coeff[2];
        out.a11.data[i] = coeff[3];
        out.a22.data[i] = coeff[4];
        out.a12.data[i] = coeff[5] / 2.0;
    }
    out
}

/// One displacement refinement pass given the prior flow estimate.
fn refine(
    prev: &PolyExpansion,
    next: &PolyExpansion,
    flow: &FlowField,
    avg_window: usize,
    poly_n: usize,
) -> FlowField {
    let (width, height) = (flow.width(), flow.height());
    // Expansions within the window radius of the border are computed on
    // clamped samples and systematically wrong; give them zero weight so
    // the averaged normal equations stay unbiased. Zeroed pixels simply
    // contribute nothing to the box average.
    let border = (poly_n / 2 + 1) as isize;
    let mut m11 = Plane::zeros(width, height);
    let mut m12 = Plane::zeros(width, height);
    let mut m22 = Plane::zeros(width, height);
    let mut v1 = Plane::zeros(width, height);
    let mut v2 = Plane::zeros(width, height);

    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            let d0x = flow.dx.data[i];
            let d0y = flow.dy.data[i];
            let wx = x as f64 + d0x;
            let wy = y as f64 + d0y;
            let inside = (x as isize) >= border
                && (x as isize) < width as isize - border
                && (y as isize) >= border
                && (y as isize) < height as isize - border
                && wx >= border as f64
                && wx <= (width as isize - 1 - border) as f64
                && wy >= border as f64
                && wy <= (height as isize - 1 - border) as f64;
            if !inside {
                continue;
            }

            // The next frame's expansion is sampled bilinearly at the
            // warped position so it matches the continuous prior used in
            // the compensation term.
            let a11 = 0.5 * (prev.a11.data[i] + next.a11.sample_bilinear(wx, wy));
            let a12 = 0.5 * (prev.a12.data[i] + next.a12.sample_bilinear(wx, wy));
            let a22 = 0.5 * (prev.a22.data[i] + next.a22.sample_bilinear(wx, wy));
            let db1 =
                -0.5 * (next.b1.sample_bilinear(wx, wy) - prev.b1.data[i]) + a11 * d0x + a12 * d0y;
            let db2 =
                -0.5 * (next.b2.sample_bilinear(wx, wy) - prev.b2.data[i]) + a12 * d0x + a22 * d0y;

            // Normal equations A^T A d = A^T db accumulated per pixel.
            m11.data[i] = a11 * a11 + a12 * a12;
            m12.data[i] = a12 * (a11 + a22);
            m22.data[i] = a22 * a22 + a12 * a12;
            v1.data[i] = a11 * db1 + a12 * db2;
            v2.data[i] = a12 * db1 + a22 * db2;
        }
    }
    let m11 = box_filter(&m11, avg_window);
    let m12 = box_filter(&m12, avg_window);
    let m22 = box_filter(&m22, avg_window);
    let v1 = box_filter(&v1, avg_window);
    let v2 = box_filter(&v2, avg_window);

    let mut out = FlowField::zeros(width, height);
    for i in 0..width * height {
        let det = m11.data[i] * m22.data[i] - m12.data[i] * m12.data[i];
        if det.abs() < 1e-12 {
            // Degenerate neighborhood: keep the prior estimate.
            out.dx.data[i] = flow.dx.data[i];
            out.dy.data[i] = flow.dy.data[i];
        } else {
            out.dx.data[i] = (m22.data[i] * v1.data[i] - m12.data[i] * v2.data[i]) / det;
            out.dy.data[i] = (m11.data[i] * v2.data[i] - m12.data[i] * v1.data[i]) / det;
        }
    }
    out
}

/// Dense flow from `prev` to `next`.
pub fn farneback_flow(prev: &Frame, next: &Frame, params: &FlowParams) -> Result<FlowField> {
    params.validate()?;
    if prev.width() != next.width() || prev.height() != next.height() {
        return Err(Error::Dimension(format!(
            "flow frames differ: {}x{} vs {}x{}",
            prev.width(),
            prev.height(),
            next.width(),
            next.height()
        )));
    }

    // Gaussian pyramids, coarsest first. Levels too small for the
    // expansion window are dropped.
    let mut pyr_prev = vec![prev.clone()];
    let mut pyr_next = vec![next.clone()];
    for _ in 1..params.pyramid_levels {
        let p = pyr_prev.last().unwrap();
        if p.width() / 2 < params.poly_n || p.height() / 2 < params.poly_n {
            break;
        }
        pyr_prev.push(downsample2_frame(p)?);
        pyr_next.push(downsample2_frame(pyr_next.last().unwrap())?);
    }

    let mut flow: Option<FlowField> = None;
    for level in (0..pyr_prev.len()).rev() {
        let fp = Plane::from_frame(&pyr_prev[level]);
        let fnx = Plane::from_frame(&pyr_next[level]);
        let exp_prev = poly_expansion(&fp, params.poly_n, params.poly_sigma);
        let exp_next = poly_expansion(&fnx, params.poly_n, params.poly_sigma);

        let mut current = match flow.take() {
            Some(coarse) => upscale_flow(&coarse, fp.width, fp.height),
            None => FlowField::zeros(fp.width, fp.height),
        };
        for _ in 0..params.iterations {
            current = refine(&exp_prev, &exp_next, &current, params.avg_window, params.poly_n);
        }
        flow = Some(current);
    }
    Ok(flow.unwrap())
}

fn upscale_flow(flow: &FlowField, out_w: usize, out_h: usize) -> FlowField {
    let mut dx = resize_bilinear(&flow.dx, out_w, out_h);
    let mut dy = resize_bilinear(&flow.dy, out_w, out_h);
    let sx = out_w as f64 / flow.width() as f64;
    let sy = out_h as f64 / flow.height() as f64;
    for v in &mut dx.data {
        *v *= sx;
    }
    for v in &mut dy.data {
        *v *= sy;
    }
    FlowField { dx, dy }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn smooth_texture(n: usize, shift_x: f64, shift_y: f64) -> Frame {
        Frame::from_fn(n, n, |x, y| {
            let x = x as f64 - shift_x;
            let y = y as f64 - shift_y;
            let v = 0.5
                + 0.18 * (0.13 * x + 0.17 * y).sin()
                + 0.14 * (0.21 * x - 0.11 * y).cos()
                + 0.10 * (0.06 * x + 0.16 * y).sin();
            v.clamp(0.05, 0.95) as f32
        })
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let a = smooth_texture(64, 0.0, 0.0);
        let flow = farneback_flow(&a, &a, &FlowParams::default()).unwrap();
        assert!(flow.mean_magnitude() < 1e-3, "{}", flow.mean_magnitude());
    }

    #[test]
    fn recovers_translation() {
        let a = smooth_texture(96, 0.0, 0.0);
        let b = smooth_texture(96, 2.0, 1.0);
        let flow = farneback_flow(&a, &b, &FlowParams::default()).unwrap();
        let m = 16;
        let mut err = 0.0;
        let mut n = 0;
        for y in m..96 - m {
            for x in m..96 - m {
                let dx = flow.dx.get(x, y);
                let dy = flow.dy.get(x, y);
                err += ((dx - 2.0).powi(2) + (dy - 1.0).powi(2)).sqrt();
                n += 1;
            }
        }
        let mean = err / n as f64;
        assert!(mean < 0.25, "interior mean error {mean}");
    }

    #[test]
    fn antisymmetry_on_translation() {
        let a = smooth_texture(96, 0.0, 0.0);
        let b = smooth_texture(96, 2.0, 1.0);
        let p = FlowParams::default();
        let fwd = farneback_flow(&a, &b, &p).unwrap();
        let bwd = farneback_flow(&b, &a, &p).unwrap();
        let m = 16;
        let mut err = 0.0;
        let mut n = 0;
        for y in m..96 - m {
            for x in m..96 - m {
                let dx = fwd.dx.get(x, y);
                let dy = fwd.dy.get(x, y);
                let bx = bwd.dx.sample_bilinear(x as f64 + dx, y as f64 + dy);
                let by = bwd.dy.sample_bilinear(x as f64 + dx, y as f64 + dy);
                err += ((dx + bx).powi(2) + (dy + by).powi(2)).sqrt();
                n += 1;
            }
        }
        let mean = err / n as f64;
        assert!(mean < 0.3, "antisymmetry mean error {mean}");
    }

    #[test]
    fn dimension_mismatch_errors() {
        let a = Frame::constant(32, 32, 0.5);
        let b = Frame::constant(16, 32, 0.5);
        assert!(farneback_flow(&a, &b, &FlowParams::default()).is_err());
    }

    #[test]
    fn even_poly_n_rejected() {
        let p = FlowParams {
            poly_n: 6,
            ..FlowParams::default()
        };
        let a = Frame::constant(32, 32, 0.5);
        assert!(farneback_flow(&a, &a, &p).is_err());
    }
}
