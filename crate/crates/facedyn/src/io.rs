//! File-boundary code: image directory sequences and the FDM1 binary
//! feature-matrix format.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use image::DynamicImage;

use crate::error::{Error, Result};
use crate::features::{DescriptorKind, FeatureMatrix};
use crate::frame::{to_grayscale, Frame, RgbFrame, VideoSequence};

const FRAME_STEM: &str = "frame_";
const FDM_MAGIC: &[u8; 4] = b"FDM1";

/// Loads a directory of `frame_%06d.png|pgm` files as a grayscale video.
pub fn load_sequence(dir: impl AsRef<Path>, fps: f64) -> Result<VideoSequence> {
    let dir = dir.as_ref();
    let mut entries: Vec<(u64, PathBuf)> = Vec::new();
    for entry in std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        let Some(stem) = path.file_stem().and_then(|s| s.to_str()) else {
            continue;
        };
        let Some(ext) = path.extension().and_then(|s| s.to_str()) else {
            continue;
        };
        if !matches!(ext.to_ascii_lowercase().as_str(), "png" | "pgm") {
            continue;
        }
        let Some(index) = stem.strip_prefix(FRAME_STEM) else {
            continue;
        };
        let Ok(index) = index.parse::<u64>() else {
            continue;
        };
        entries.push((index, path));
    }
    entries.sort();
    if entries.len() < 2 {
        return Err(Error::Invalid(format!(
            "directory {} contains {} matching frames, need at least 2",
            dir.display(),
            entries.len()
        )));
    }
    let mut frames = Vec::with_capacity(entries.len());
    for (_, path) in entries {
        frames.push(load_frame(&path)?);
    }
    VideoSequence::new(frames, fps)
}

/// Loads a single image as a grayscale frame (ITU-R 601 luma for color
/// sources).
pub fn load_frame(path: impl AsRef<Path>) -> Result<Frame> {
    let img = image::open(path.as_ref())?;
    Ok(match img {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Frame::from_fn(w as usize, h as usize, |x, y| {
                buf.get_pixel(x as u32, y as u32)[0] as f32 / 255.0
            })
        }
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            Frame::from_fn(w as usize, h as usize, |x, y| {
                buf.get_pixel(x as u32, y as u32)[0] as f32 / 65535.0
            })
        }
        other => {
            let rgb = other.to_rgb32f();
            let (w, h) = rgb.dimensions();
            let frame = RgbFrame::new(
                w as usize,
                h as usize,
                rgb.pixels().flat_map(|p| p.0).collect(),
            )?;
            to_grayscale(&frame)
        }
    })
}

/// Writes a sequence as 8-bit PNG files using the `frame_%06d` scheme.
pub fn save_sequence(video: &VideoSequence, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for (i, frame) in video.frames().iter().enumerate() {
        let path = dir.join(format!("{FRAME_STEM}{i:06}.png"));
        save_frame(frame, &path)?;
    }
    Ok(())
}

pub fn save_frame(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    let buf = image::GrayImage::from_fn(frame.width() as u32, frame.height() as u32, |x, y| {
        let v = frame.get(x as usize, y as usize).clamp(0.0, 1.0);
        image::Luma([(v * 255.0).round() as u8])
    });
    buf.save(path.as_ref())?;
    Ok(())
}

/// Writes a feature matrix in the FDM1 format: magic "FDM1", u32 LE rows,
/// u32 LE cols, then rows*cols f32 LE values row-major.
pub fn write_feature_matrix(matrix: &FeatureMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut bytes = Vec::with_capacity(12 + matrix.data().len() * 4);
    bytes.extend_from_slice(FDM_MAGIC);
    bytes.extend_from_slice(&(matrix.rows() as u32).to_le_bytes());
    bytes.extend_from_slice(&(matrix.cols() as u32).to_le_bytes());
    for &v in matrix.data() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn read_feature_matrix(path: impl AsRef<Path>, kind: DescriptorKind) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut header = [0u8; 12];
    file.read_exact(&mut header)
        .map_err(|_| Error::format(path, "truncated header"))?;
    if &header[0..4] != FDM_MAGIC {
        return Err(Error::format(path, "bad magic, expected FDM1"));
    }
    let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
    let mut payload = Vec::new();
    file.read_to_end(&mut payload).map_err(|e| Error::io(path, e))?;
    if payload.len() != rows * cols * 4 {
        return Err(Error::format(
            path,
            format!(
                "payload is {} bytes, expected {} for {rows}x{cols}",
                payload.len(),
                rows * cols * 4
            ),
        ));
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    if data.iter().any(|v| !v.is_finite()) {
        return Err(Error::format(path, "non-finite feature value"));
    }
    FeatureMatrix::new(rows, cols, data, kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_roundtrip_in_index_order() {
        let dir = tempfile::tempdir().unwrap();
        let frames: Vec<Frame> = (0..10)
            .map(|i| Frame::constant(8, 6, i as f32 / 10.0))
            .collect();
        let video = VideoSequence::new(frames, 50.0).unwrap();
        save_sequence(&video, dir.path()).unwrap();
        let loaded = load_sequence(dir.path(), 50.0).unwrap();
        assert_eq!(loaded.len(), 10);
        for (i, f) in loaded.frames().iter().enumerate() {
            let expected = ((i as f32 / 10.0) * 255.0).round() / 255.0;
            assert!((f.get(3, 3) - expected).abs() < 1e-6, "frame {i}");
        }
    }

    #[test]
    fn single_frame_dir_errors() {
        let dir = tempfile::tempdir().unwrap();
        save_frame(
            &Frame::constant(8, 6, 0.5),
            dir.path().join("frame_000000.png"),
        )
        .unwrap();
        assert!(load_sequence(dir.path(), 50.0).is_err());
    }

    #[test]
    fn mixed_dimensions_error() {
        let dir = tempfile::tempdir().unwrap();
        save_frame(
            &Frame::constant(64, 64, 0.5),
            dir.path().join("frame_000000.png"),
        )
        .unwrap();
        save_frame(
            &Frame::constant(32, 32, 0.5),
            dir.path().join("frame_000001.png"),
        )
        .unwrap();
        assert!(matches!(
            load_sequence(dir.path(), 50.0),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn fdm_bad_magic() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.fdm");
        std::fs::write(&path, b"NOPE\x01\x00\x00\x00\x01\x00\x00\x00").unwrap();
        let err = read_feature_matrix(&path, DescriptorKind::External).unwrap_err();
        assert!(err.to_string().contains("magic"));
    }

    #[test]
    fn fdm_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.fdm");
        let m = FeatureMatrix::new(2, 3, vec![0.0, 1.5, -2.0, 3.25, 4.0, 5.0], DescriptorKind::Hog)
            .unwrap();
        write_feature_matrix(&m, &path).unwrap();
        let back = read_feature_matrix(&path, DescriptorKind::Hog).unwrap();
        assert_eq!(back.rows(), 2);
        assert_eq!(back.cols(), 3);
        assert_eq!(back.data(), m.data());
    }
}
