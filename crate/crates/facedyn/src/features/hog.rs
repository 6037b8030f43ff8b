//! UoCTTI-variant HOG: contrast-sensitive and contrast-insensitive
//! orientation channels plus texture-energy features, 31 values per cell
//! for 9 orientations.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frame::Frame;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HogParams {
    /// Cell side in pixels.
    pub cell: usize,
    /// Orientation count O; per-cell dimension is 3*O + 4.
    pub orientations: usize,
}

impl Default for HogParams {
    fn default() -> Self {
        HogParams {
            cell: 4,
            orientations: 9,
        }
    }
}

impl HogParams {
    pub fn validate(&self) -> Result<()> {
        if self.cell < 2 {
            return Err(Error::Invalid(format!(
                "HOG cell must be >= 2, got {}",
                self.cell
            )));
        }
        if self.orientations < 2 {
            return Err(Error::Invalid(format!(
                "HOG orientations must be >= 2, got {}",
                self.orientations
            )));
        }
        Ok(())
    }

    pub fn dims_per_cell(&self) -> usize {
        3 * self.orientations + 4
    }

    /// Cell grid for a frame, cropping the remainder.
    pub fn grid(&self, width: usize, height: usize) -> (usize, usize) {
        (width / self.cell, height / self.cell)
    }
}

const CLAMP: f64 = 0.2;
const NORM_EPS: f64 = 1e-6;
const TEXTURE_GAIN: f64 = 0.2357;

/// Per-cell descriptor grid, flattened row-major over cells with
/// `dims_per_cell` contiguous values per cell. Layout per cell:
/// 2*O contrast-sensitive channels, O contrast-insensitive channels,
/// then 4 texture-energy features.
pub fn hog_descriptor(frame: &Frame, params: &HogParams) -> Result<Vec<f64>> {
    params.validate()?;
    let (cells_x, cells_y) = params.grid(frame.width(), frame.height());
    if cells_x == 0 || cells_y == 0 {
        return Err(Error::Dimension(format!(
            "frame {}x{} smaller than one {}-px cell",
            frame.width(),
            frame.height(),
            params.cell
        )));
    }
    let o = params.orientations;
    let signed_bins = 2 * o;
    let cell = params.cell as f64;
    let two_pi = 2.0 * std::f64::consts::PI;

    // Soft-binned signed orientation histograms per cell.
    let mut hist = vec![0.0f64; cells_x * cells_y * signed_bins];
    let used_w = cells_x * params.cell;
    let used_h = cells_y * params.cell;
    for y in 0..used_h {
        for x in 0..used_w {
            let gx = (frame.get_clamped(x as isize + 1, y as isize)
                - frame.get_clamped(x as isize - 1, y as isize)) as f64
                / 2.0;
            let gy = (frame.get_clamped(x as isize, y as isize + 1)
                - frame.get_clamped(x as isize, y as isize - 1)) as f64
                / 2.0;
            let mag = (gx * gx + gy * gy).sqrt();
            if mag == 0.0 {
                continue;
            }
            let ang = gy.atan2(gx).rem_euclid(two_pi);
            let pos = ang / two_pi * signed_bins as f64;
            let b0 = pos.floor() as usize % signed_bins;
            let b1 = (b0 + 1) % signed_bins;
            let wb1 = pos - pos.floor();

            // Bilinear spatial interpolation into neighboring cells.
            let cxf = (x as f64 + 0.5) / cell - 0.5;
            let cyf = (y as f64 + 0.5) / cell - 0.5;
            let cx0 = cxf.floor();
            let cy0 = cyf.floor();
            let wx1 = cxf - cx0;
            let wy1 = cyf - cy0;
            for (dcx, wx) in [(0i64, 1.0 - wx1), (1, wx1)] {
                for (dcy, wy) in [(0i64, 1.0 - wy1), (1, wy1)] {
                    let cx = cx0 as i64 + dcx;
                    let cy = cy0 as i64 + dcy;
                    if cx < 0 || cy < 0 || cx >= cells_x as i64 || cy >= cells_y as i64 {
                        continue;
                    }
                    let base = (cy as usize * cells_x + cx as usize) * signed_bins;
                    hist[base + b0] += mag * wx * wy * (1.0 - wb1);
                    hist[base + b1] += mag * wx * wy * wb1;
                }
            }
        }
    }

    // Per-cell gradient energy from the contrast-insensitive channels.
    let mut energy = vec![0.0f64; cells_x * cells_y];
    for cy in 0..cells_y {
        for cx in 0..cells_x {
            let base = (cy * cells_x + cx) * signed_bins;
            let mut e = 0.0;
            for ob in 0..o {
                let u = hist[base + ob] + hist[base + ob + o];
                e += u * u;
            }
            energy[cy * cells_x + cx] = e;
        }
    }

    // Four diagonal 2x2 block normalizers per cell, indices clamped at
    // the border.
    let block_energy = |cx: i64, cy: i64, dx: i64, dy: i64| -> f64 {
        let at = |x: i64, y: i64| -> f64 {
            let x = x.clamp(0, cells_x as i64 - 1) as usize;
            let y = y.clamp(0, cells_y as i64 - 1) as usize;
            energy[y * cells_x + x]
        };
        at(cx, cy) + at(cx + dx, cy) + at(cx, cy + dy) + at(cx + dx, cy + dy)
    };

    let dims = params.dims_per_cell();
    let mut out = vec![0.0f64; cells_x * cells_y * dims];
    for cy in 0..cells_y {
        for cx in 0..cells_x {
            let hbase = (cy * cells_x + cx) * signed_bins;
            let obase = (cy * cells_x + cx) * dims;
            let norms: [f64; 4] = [
                1.0 / (block_energy(cx as i64, cy as i64, -1, -1).sqrt() + NORM_EPS),
                1.0 / (block_energy(cx as i64, cy as i64, 1, -1).sqrt() + NORM_EPS),
                1.0 / (block_energy(cx as i64, cy as i64, -1, 1).sqrt() + NORM_EPS),
                1.0 / (block_energy(cx as i64, cy as i64, 1, 1).sqrt() + NORM_EPS),
            ];
            let mut texture = [0.0f64; 4];
            for ob in 0..signed_bins {
                let h = hist[hbase + ob];
                let mut acc = 0.0;
                for (k, n) in norms.iter().enumerate() {
                    let t = (h * n).min(CLAMP);
                    acc += t;
                    texture[k] += t;
                }
                out[obase + ob] = 0.5 * acc;
            }
            for ob in 0..o {
                let u = hist[hbase + ob] + hist[hbase + ob + o];
                let mut acc = 0.0;
                for n in &norms {
                    acc += (u * n).min(CLAMP);
                }
                out[obase + signed_bins + ob] = 0.5 * acc;
            }
            for k in 0..4 {
                out[obase + 3 * o + k] = TEXTURE_GAIN * texture[k];
            }
        }
    }
    Ok(out)
}
