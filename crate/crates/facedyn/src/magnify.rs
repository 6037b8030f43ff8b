//! Eulerian video magnification: Laplacian pyramid per frame, ideal
//! temporal bandpass per pixel and level, wavelength-attenuated
//! amplification, reconstruction.

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{downsample2, upsample2, Plane};
use crate::frame::VideoSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MagnifyParams {
    pub alpha: f64,
    pub f_lo: f64,
    pub f_hi: f64,
    pub levels: usize,
    pub lambda_c: f64,
}

impl Default for MagnifyParams {
    fn default() -> Self {
        MagnifyParams {
            alpha: 10.0,
            f_lo: 0.4,
            f_hi: 3.0,
            levels: 4,
            lambda_c: 16.0,
        }
    }
}

impl MagnifyParams {
    pub fn validate(&self, fps: f64) -> Result<()> {
        if self.alpha < 0.0 {
            return Err(Error::Invalid("alpha must be >= 0".into()));
        }
        if !(self.f_lo > 0.0 && self.f_lo < self.f_hi && self.f_hi < fps / 2.0) {
            return Err(Error::Invalid(format!(
                "band [{}, {}] Hz invalid for fps {fps}",
                self.f_lo, self.f_hi
            )));
        }
        if self.levels < 1 {
            return Err(Error::Invalid("levels must be >= 1".into()));
        }
        if self.lambda_c <= 0.0 {
            return Err(Error::Invalid("lambda_c must be positive".into()));
        }
        Ok(())
    }
}

/// Laplacian pyramid: `levels - 1` band-pass images plus a low-pass
/// residual (last element).
pub fn build_pyramid(frame: &Plane, levels: usize) -> Result<Vec<Plane>> {
    if levels < 1 {
        return Err(Error::Invalid("pyramid needs >= 1 level".into()));
    }
    if frame.width.min(frame.height) < (1 << levels) {
        return Err(Error::Dimension(format!(
            "{}x{} frame too small for {levels} pyramid levels",
            frame.width, frame.height
        )));
    }
    let mut pyramid = Vec::with_capacity(levels);
    let mut current = frame.clone();
    for _ in 0..levels - 1 {
        let down = downsample2(&current);
        let up = upsample2(&down, current.width, current.height);
        let mut band = Plane::zeros(current.width, current.height);
        for i in 0..band.data.len() {
            band.data[i] = current.data[i] - up.data[i];
        }
        pyramid.push(band);
        current = down;
    }
    pyramid.push(current);
    Ok(pyramid)
}

/// Inverse of [`build_pyramid`]: exact up to float rounding.
pub fn reconstruct(pyramid: &[Plane]) -> Result<Plane> {
    let Some(residual) = pyramid.last() else {
        return Err(Error::Invalid("empty pyramid".into()));
    };
    let mut current = residual.clone();
    for band in pyramid.iter().rev().skip(1) {
        let mut up = upsample2(&current, band.width, band.height);
        for i in 0..up.data.len() {
            up.data[i] += band.data[i];
        }
        current = up;
    }
    Ok(current)
}

/// Ideal bandpass over the whole series via a length-T DFT: bins with
/// |frequency| outside `[f_lo, f_hi]` (inclusive) are zeroed.
pub fn temporal_bandpass(series: &[f64], f_lo: f64, f_hi: f64, fps: f64) -> Result<Vec<f64>> {
    let t_len = series.len();
    if t_len < 4 {
        return Err(Error::Invalid(format!(
            "temporal bandpass needs >= 4 samples, got {t_len}"
        )));
    }
    if !(f_lo > 0.0 && f_lo < f_hi && f_hi < fps / 2.0) {
        return Err(Error::Invalid(format!(
            "band [{f_lo}, {f_hi}] Hz outside (0, {}) Hz",
            fps / 2.0
        )));
    }
    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(t_len);
    let ifft = planner.plan_fft_inverse(t_len);
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft.process(&mut buf);
    apply_band_mask(&mut buf, f_lo, f_hi, fps);
    ifft.process(&mut buf);
    Ok(buf.iter().map(|c| c.re / t_len as f64).collect())
}

fn apply_band_mask(spectrum: &mut [Complex<f64>], f_lo: f64, f_hi: f64, fps: f64) {
    let t_len = spectrum.len();
    for (k, bin) in spectrum.iter_mut().enumerate() {
        let signed_k = if k <= t_len / 2 {
            k as f64
        } else {
            k as f64 - t_len as f64
        };
        let freq = (signed_k * fps / t_len as f64).abs();
        if freq < f_lo || freq > f_hi {
            *bin = Complex::new(0.0, 0.0);
        }
    }
}

/// Spatial wavelength assigned to a pyramid level; doubles per level. The
/// residual uses the coarsest band's wavelength.
fn level_wavelength(level: usize, levels: usize) -> f64 {
    let effective = level.min(levels - 1);
    (1 << (effective + 2)) as f64
}

/// Magnifies in-band temporal variation: per frame build a Laplacian
/// pyramid, bandpass every pixel's time signal per level, scale by
/// `alpha_level = min(alpha, alpha * lambda_level / lambda_c)`, add back,
/// reconstruct, clamp to `[0,1]`.
pub fn magnify_sequence(video: &VideoSequence, params: &MagnifyParams) -> Result<VideoSequence> {
    params.validate(video.fps())?;
    let t_len = video.len();
    if t_len < 4 {
        return Err(Error::Invalid(format!(
            "magnification needs >= 4 frames, got {t_len}"
        )));
    }

    let mut pyramids: Vec<Vec<Plane>> = Vec::with_capacity(t_len);
    for frame in video.frames() {
        pyramids.push(build_pyramid(&Plane::from_frame(frame), params.levels)?);
    }

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(t_len);
    let ifft = planner.plan_fft_inverse(t_len);
    let (f_lo, f_hi, fps) = (params.f_lo, params.f_hi, video.fps());

    for level in 0..params.levels {
        let lambda = level_wavelength(level, params.levels);
        let alpha_level = params.alpha.min(params.alpha * lambda / params.lambda_c);
        if alpha_level == 0.0 {
            continue;
        }
        let n_px = pyramids[0][level].data.len();
        // Pixel-major stack of time signals for this level.
        let mut stack = vec![0.0f64; n_px * t_len];
        for (t, pyr) in pyramids.iter().enumerate() {
            for (i, &v) in pyr[level].data.iter().enumerate() {
                stack[i * t_len + t] = v;
            }
        }
        stack.par_chunks_mut(t_len).for_each(|signal| {
            let mut buf: Vec<Complex<f64>> =
                signal.iter().map(|&v| Complex::new(v, 0.0)).collect();
            fft.process(&mut buf);
            apply_band_mask(&mut buf, f_lo, f_hi, fps);
            ifft.process(&mut buf);
            for (s, c) in signal.iter_mut().zip(&buf) {
                *s = alpha_level * c.re / t_len as f64;
            }
        });
        for (t, pyr) in pyramids.iter_mut().enumerate() {
            for (i, v) in pyr[level].data.iter_mut().enumerate() {
                *v += stack[i * t_len + t];
            }
        }
    }

    let mut frames = Vec::with_capacity(t_len);
    for pyr in &pyramids {
        frames.push(reconstruct(pyr)?.to_frame());
    }
    VideoSequence::new(frames, video.fps())
}
