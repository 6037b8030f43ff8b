//! Scalar image plane and separable filtering primitives shared by the
//! tracking, magnification, and feature stages.

use crate::error::{Error, Result};
use crate::frame::Frame;

/// Signed scalar image used for intermediate numeric work (gradients,
/// pyramid bands, flow components). Unlike [`Frame`], values are
/// unconstrained f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Plane {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_frame(frame: &Frame) -> Self {
        Plane {
            width: frame.width(),
            height: frame.height(),
            data: frame.pixels().iter().map(|&p| p as f64).collect(),
        }
    }

    /// Converts back to a frame, clamping to `[0,1]`.
    pub fn to_frame(&self) -> Frame {
        Frame::from_fn(self.width, self.height, |x, y| {
            self.data[y * self.width + x] as f32
        })
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.data[y * self.width + x] = v;
    }

    pub fn sample_bilinear(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let x0 = x0 as usize;
        let y0 = y0 as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let top = self.get(x0, y0) * (1.0 - fx) + self.get(x1, y0) * fx;
        let bot = self.get(x0, y1) * (1.0 - fx) + self.get(x1, y1) * fx;
        top * (1.0 - fy) + bot * fy
    }
}

/// Horizontal correlation with a centered 1D kernel, edge-clamped.
pub fn correlate_rows(src: &Plane, kernel: &[f64]) -> Plane {
    let r = (kernel.len() / 2) as isize;
    let mut out = Plane::zeros(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * src.get_clamped(x as isize + k as isize - r, y as isize);
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Vertical correlation with a centered 1D kernel, edge-clamped.
pub fn correlate_cols(src: &Plane, kernel: &[f64]) -> Plane {
    let r = (kernel.len() / 2) as isize;
    let mut out = Plane::zeros(src.width, src.height);
    for y in 0..src.height {
        for x in 0..src.width {
            let mut acc = 0.0;
            for (k, &kv) in kernel.iter().enumerate() {
                acc += kv * src.get_clamped(x as isize, y as isize + k as isize - r);
            }
            out.set(x, y, acc);
        }
    }
    out
}

pub fn correlate_separable(src: &Plane, kx: &[f64], ky: &[f64]) -> Plane {
    correlate_cols(&correlate_rows(src, kx), ky)
}

/// Normalized Gaussian kernel of the given radius.
pub fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let mut k: Vec<f64> = (-(radius as isize)..=radius as isize)
        .map(|t| (-((t * t) as f64) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

pub fn gaussian_blur(src: &Plane, sigma: f64, radius: usize) -> Plane {
    let k = gaussian_kernel(sigma, radius);
    correlate_separable(src, &k, &k)
}

/// Sobel gradients `(gx, gy)`.
pub fn sobel_gradients(src: &Plane) -> (Plane, Plane) {
    let diff = [-1.0, 0.0, 1.0];
    let smooth = [1.0, 2.0, 1.0];
    let gx = correlate_separable(src, &diff, &smooth);
    let gy = correlate_separable(src, &smooth, &diff);
    (gx, gy)
}

/// 5-tap binomial kernel `[1 4 6 4 1]/16`.
pub const BINOMIAL5: [f64; 5] = [1.0 / 16.0, 4.0 / 16.0, 6.0 / 16.0, 4.0 / 16.0, 1.0 / 16.0];

/// Blurs with the 5-tap binomial kernel and keeps every second sample.
pub fn downsample2(src: &Plane) -> Plane {
    let blurred = correlate_separable(src, &BINOMIAL5, &BINOMIAL5);
    let w = src.width.div_ceil(2);
    let h = src.height.div_ceil(2);
    let mut out = Plane::zeros(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, blurred.get(x * 2, y * 2));
        }
    }
    out
}

fn reflect101(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * (n - 1) - i;
        } else {
            return i as usize;
        }
    }
}

/// Zero-insertion upsample to the requested size followed by the binomial
/// kernel scaled by 2 per axis (interpolating counterpart of
/// [`downsample2`]). Borders are mirrored (reflect-101) so the zero /
/// sample parity is preserved and constants are reproduced exactly.
pub fn upsample2(src: &Plane, out_w: usize, out_h: usize) -> Plane {
    let mut up = Plane::zeros(out_w, out_h);
    for y in 0..src.height {
        for x in 0..src.width {
            if x * 2 < out_w && y * 2 < out_h {
                up.set(x * 2, y * 2, src.get(x, y));
            }
        }
    }
    let k: Vec<f64> = BINOMIAL5.iter().map(|v| v * 2.0).collect();
    let r = (k.len() / 2) as isize;
    let mut mid = Plane::zeros(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * up.get(reflect101(x as isize + t as isize - r, out_w), y);
            }
            mid.set(x, y, acc);
        }
    }
    let mut out = Plane::zeros(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let mut acc = 0.0;
            for (t, &kv) in k.iter().enumerate() {
                acc += kv * mid.get(x, reflect101(y as isize + t as isize - r, out_h));
            }
            out.set(x, y, acc);
        }
    }
    out
}

/// Uniform box average over a `size` x `size` window, edge-clamped.
pub fn box_filter(src: &Plane, size: usize) -> Plane {
    let k = vec![1.0 / size as f64; size];
    correlate_separable(src, &k, &k)
}

/// Bilinear resize to arbitrary dimensions.
pub fn resize_bilinear(src: &Plane, out_w: usize, out_h: usize) -> Plane {
    let sx = src.width as f64 / out_w as f64;
    let sy = src.height as f64 / out_h as f64;
    let mut out = Plane::zeros(out_w, out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            let u = (x as f64 + 0.5) * sx - 0.5;
            let v = (y as f64 + 0.5) * sy - 0.5;
            out.set(x, y, src.sample_bilinear(u, v));
        }
    }
    out
}

/// Gaussian-antialiased factor-2 downsample of a frame, used by the
/// tracking and flow pyramids.
pub fn downsample2_frame(frame: &Frame) -> Result<Frame> {
    if frame.width() < 2 || frame.height() < 2 {
        return Err(Error::Dimension(format!(
            "frame {}x{} too small to downsample",
            frame.width(),
            frame.height()
        )));
    }
    Ok(downsample2(&Plane::from_frame(frame)).to_frame())
}
