//! Grayscale frames, video sequences, and affine warping.

use crate::error::{Error, Result};
use crate::geometry::AffineTransform;

/// Single grayscale frame. Intensities are `[0,1]` scalars; 8-bit
/// quantization happens only at file boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<f32>,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != width * height {
            return Err(Error::Dimension(format!(
                "frame {}x{} needs {} pixels, got {}",
                width,
                height,
                width * height,
                pixels.len()
            )));
        }
        if pixels.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
            return Err(Error::Invalid(
                "frame intensities must be finite and in [0,1]".into(),
            ));
        }
        Ok(Frame {
            width,
            height,
            pixels,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f32) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).clamp(0.0, 1.0));
            }
        }
        Frame {
            width,
            height,
            pixels,
        }
    }

    pub fn constant(width: usize, height: usize, value: f32) -> Self {
        Frame {
            width,
            height,
            pixels: vec![value.clamp(0.0, 1.0); width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[f32] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f32 {
        self.pixels[y * self.width + x]
    }

    /// Clamped integer access: coordinates outside the frame snap to the
    /// nearest edge pixel.
    #[inline]
    pub fn get_clamped(&self, x: isize, y: isize) -> f32 {
        let x = x.clamp(0, self.width as isize - 1) as usize;
        let y = y.clamp(0, self.height as isize - 1) as usize;
        self.pixels[y * self.width + x]
    }

    /// Bilinear sample at subpixel coordinates, clamping to the edge.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> f32 {
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
        let p00 = self.get(x0, y0) as f64;
        let p10 = self.get(x1, y0) as f64;
        let p01 = self.get(x0, y1) as f64;
        let p11 = self.get(x1, y1) as f64;
        let top = p00 * (1.0 - fx) + p10 * fx;
        let bot = p01 * (1.0 - fx) + p11 * fx;
        (top * (1.0 - fy) + bot * fy) as f32
    }
}

/// 3-channel frame with interleaved RGB values in `[0,1]`.
#[derive(Debug, Clone)]
pub struct RgbFrame {
    pub width: usize,
    pub height: usize,
    /// Interleaved `[r, g, b, r, g, b, ...]`, row-major.
    pub pixels: Vec<f32>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, pixels: Vec<f32>) -> Result<Self> {
        if pixels.len() != 3 * width * height {
            return Err(Error::Dimension(format!(
                "rgb frame {}x{} needs {} values, got {}",
                width,
                height,
                3 * width * height,
                pixels.len()
            )));
        }
        Ok(RgbFrame {
            width,
            height,
            pixels,
        })
    }
}

/// ITU-R 601 luma conversion, clamped to `[0,1]`.
pub fn to_grayscale(rgb: &RgbFrame) -> Frame {
    let mut pixels = Vec::with_capacity(rgb.width * rgb.height);
    for px in rgb.pixels.chunks_exact(3) {
        let luma = 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        pixels.push(luma.clamp(0.0, 1.0));
    }
    Frame {
        width: rgb.width,
        height: rgb.height,
        pixels,
    }
}

/// Warps `src` into an `out_w` x `out_h` frame: output pixel `(u,v)` is the
/// bilinear sample of `src` at `t⁻¹·(u,v)`, with edge clamping.
pub fn warp_affine(src: &Frame, t: &AffineTransform, out_w: usize, out_h: usize) -> Result<Frame> {
    let inv = t.invert()?;
    let mut pixels = Vec::with_capacity(out_w * out_h);
    for v in 0..out_h {
        for u in 0..out_w {
            let (x, y) = inv.apply(u as f64, v as f64);
            pixels.push(src.sample_bilinear(x, y));
        }
    }
    Ok(Frame {
        width: out_w,
        height: out_h,
        pixels,
    })
}

/// Ordered grayscale frames with a frame rate.
#[derive(Debug, Clone)]
pub struct VideoSequence {
    frames: Vec<Frame>,
    fps: f64,
}

impl VideoSequence {
    pub fn new(frames: Vec<Frame>, fps: f64) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Invalid(format!(
                "video needs at least 2 frames, got {}",
                frames.len()
            )));
        }
        if !(fps > 0.0) {
            return Err(Error::Invalid(format!("fps must be positive, got {fps}")));
        }
        let (w, h) = (frames[0].width(), frames[0].height());
        for (i, f) in frames.iter().enumerate() {
            if f.width() != w || f.height() != h {
                return Err(Error::Dimension(format!(
                    "frame {i} is {}x{}, expected {w}x{h}",
                    f.width(),
                    f.height()
                )));
            }
        }
        Ok(VideoSequence { frames, fps })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn fps(&self) -> f64 {
        self.fps
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn width(&self) -> usize {
        self.frames[0].width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].height()
    }
}
