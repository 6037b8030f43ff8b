//! Local phase quantization: signs of decorrelated short-term Fourier
//! coefficients over a local window, pooled into a 256-bin histogram.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{correlate_cols, correlate_rows, Plane};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LpqParams {
    /// Odd window size M; the analysis frequency is a = 1/M.
    pub window: usize,
    /// Pixel correlation coefficient for the decorrelation model.
    pub rho: f64,
}

impl Default for LpqParams {
    fn default() -> Self {
        LpqParams {
            window: 7,
            rho: 0.9,
        }
    }
}

impl LpqParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window % 2 == 0 {
            return Err(Error::Invalid(format!(
                "LPQ window must be odd and >= 3, got {}",
                self.window
            )));
        }
        if !(0.0..1.0).contains(&self.rho) {
            return Err(Error::Invalid(format!(
                "LPQ rho must be in [0,1), got {}",
                self.rho
            )));
        }
        Ok(())
    }
}

/// Sign ties (coefficients that are zero up to accumulated rounding)
/// quantize to bit 1.
const TIE_EPS: f64 = 1e-12;

/// The four analysis frequencies as integer multiples of a=1/M along
/// (x, y): (1,0), (0,1), (1,1), (1,-1).
const FREQS: [(i32, i32); 4] = [(1, 0), (0, 1), (1, 1), (1, -1)];

/// Whitening matrix rows follow the coefficient order
/// [Re u1, Im u1, Re u2, Im u2, Re u3, Im u3, Re u4, Im u4] (bits 0..7).
fn whitening_matrix(params: &LpqParams) -> DMatrix<f64> {
    let m = params.window as i32;
    let r = m / 2;
    let a = 1.0 / m as f64;
    let n = (m * m) as usize;

    // W: 8 x M^2, rows are the real/imaginary STFT basis vectors.
    let mut w = DMatrix::zeros(8, n);
    let mut idx = 0;
    for dy in -r..=r {
        for dx in -r..=r {
            for (f, &(ux, uy)) in FREQS.iter().enumerate() {
                let phase = 2.0 * std::f64::consts::PI * a * (ux * dx + uy * dy) as f64;
                w[(2 * f, idx)] = phase.cos();
                w[(2 * f + 1, idx)] = -phase.sin();
            }
            idx += 1;
        }
    }

    // Model covariance of window pixels: rho^distance.
    let mut cov = DMatrix::zeros(n, n);
    let offset = |i: usize| ((i as i32 % m) - r, (i as i32 / m) - r);
    for i in 0..n {
        for j in 0..n {
            let (xi, yi) = offset(i);
            let (xj, yj) = offset(j);
            let dist = (((xi - xj).pow(2) + (yi - yj).pow(2)) as f64).sqrt();
            cov[(i, j)] = params.rho.powf(dist);
        }
    }

    // Covariance of the 8 coefficients, eigendecomposed for whitening.
    let d = &w * cov * w.transpose();
    let sym = nalgebra::SymmetricEigen::new(d);
    let mut order: Vec<usize> = (0..8).collect();
    order.sort_by(|&i, &j| {
        sym.eigenvalues[j]
            .partial_cmp(&sym.eigenvalues[i])
            .unwrap()
    });
    let mut v = DMatrix::zeros(8, 8);
    for (col, &src) in order.iter().enumerate() {
        let mut vec: Vec<f64> = sym.eigenvectors.column(src).iter().copied().collect();
        // Fix eigenvector sign: the largest-magnitude entry is positive.
        let pivot = vec
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if vec[pivot] < 0.0 {
            for x in &mut vec {
                *x = -*x;
            }
        }
        for rrow in 0..8 {
            v[(rrow, col)] = vec[rrow];
        }
    }
    v.transpose()
}

struct ComplexPlane {
    re: Plane,
    im: Plane,
}

/// 256-bin LPQ code histogram over the interior pixels (full-window
/// support), normalized to sum 1.
pub fn lpq_descriptor(frame: &Frame, params: &LpqParams) -> Result<Vec<f64>> {
    params.validate()?;
    let m = params.window;
    if frame.width() < m || frame.height() < m {
        return Err(Error::Dimension(format!(
            "frame {}x{} smaller than LPQ window {m}",
            frame.width(),
            frame.height()
        )));
    }
    let r = m / 2;
    let a = 1.0 / m as f64;

    let ones = vec![1.0; m];
    let cos_k: Vec<f64> = (0..m)
        .map(|t| (2.0 * std::f64::consts::PI * a * (t as f64 - r as f64)).cos())
        .collect();
    let msin_k: Vec<f64> = (0..m)
        .map(|t| -(2.0 * std::f64::consts::PI * a * (t as f64 - r as f64)).sin())
        .collect();
    let psin_k: Vec<f64> = msin_k.iter().map(|v| -v).collect();

    let src = Plane::from_frame(frame);
    // Horizontal passes shared across frequencies.
    let h_cos = correlate_rows(&src, &cos_k);
    let h_msin = correlate_rows(&src, &msin_k);
    let h_ones = correlate_rows(&src, &ones);

    let coeffs: [ComplexPlane; 4] = [
        // u1 = (a, 0): complex horizontal, uniform vertical.
        ComplexPlane {
            re: correlate_cols(&h_cos, &ones),
            im: correlate_cols(&h_msin, &ones),
        },
        // u2 = (0, a): uniform horizontal, complex vertical.
        ComplexPlane {
            re: correlate_cols(&h_ones, &cos_k),
            im: correlate_cols(&h_ones, &msin_k),
        },
        // u3 = (a, a).
        complex_vertical(&h_cos, &h_msin, &cos_k, &msin_k),
        // u4 = (a, -a).
        complex_vertical(&h_cos, &h_msin, &cos_k, &psin_k),
    ];

    let whiten = whitening_matrix(params);
    let mut hist = vec![0.0f64; 256];
    let mut count = 0usize;
    for y in r..frame.height() - r {
        for x in r..frame.width() - r {
            let raw = [
                coeffs[0].re.get(x, y),
                coeffs[0].im.get(x, y),
                coeffs[1].re.get(x, y),
                coeffs[1].im.get(x, y),
                coeffs[2].re.get(x, y),
                coeffs[2].im.get(x, y),
                coeffs[3].re.get(x, y),
                coeffs[3].im.get(x, y),
            ];
            let mut code = 0usize;
            for bit in 0..8 {
                let mut g = 0.0;
                for k in 0..8 {
                    g += whiten[(bit, k)] * raw[k];
                }
                if g >= -TIE_EPS {
                    code |= 1 << bit;
                }
            }
            hist[code] += 1.0;
            count += 1;
        }
    }
    for v in &mut hist {
        *v /= count as f64;
    }
    Ok(hist)
}

fn complex_vertical(h_re: &Plane, h_im: &Plane, k_re: &[f64], k_im: &[f64]) -> ComplexPlane {
    ComplexPlane {
        re: sub(&correlate_cols(h_re, k_re), &correlate_cols(h_im, k_im)),
        im: add(&correlate_cols(h_re, k_im), &correlate_cols(h_im, k_re)),
    }
}

fn add(a: &Plane, b: &Plane) -> Plane {
    let mut out = a.clone();
    for (o, v) in out.data.iter_mut().zip(&b.data) {
        *o += v;
    }
    out
}

fn sub(a: &Plane, b: &Plane) -> Plane {
    let mut out = a.clone();
    for (o, v) in out.data.iter_mut().zip(&b.data) {
        *o -= v;
    }
    out
}

/// Chi-squared distance between two histograms.
pub fn chi_squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let s = x + y;
            if s > 0.0 {
                (x - y) * (x - y) / s
            } else {
                0.0
            }
        })
        .sum()
}
