//! File formats: one-value-per-line signal CSV, binary PGM frames, and raw
//! little-endian `f32` stacks with a JSON sidecar.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder};
use serde::{Deserialize, Serialize};

use super::image::{FrameStream, Image};
use crate::{Error, Result};

pub fn parse_signal_csv(text: &str) -> Result<Vec<f64>> {
    text.lines()
        .enumerate()
        .map(|(n, l)| (n, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .map(|(n, l)| {
            l.parse::<f64>()
                .map_err(|e| Error::Format(format!("line {}: {l:?}: {e}", n + 1)))
        })
        .collect()
}

pub fn format_signal_csv(values: &[f64]) -> String {
    let mut out = String::with_capacity(values.len() * 20);
    for v in values {
        out.push_str(&format!("{v}\n"));
    }
    out
}

pub fn read_signal_csv(path: &Path) -> Result<Vec<f64>> {
    parse_signal_csv(&fs::read_to_string(path)?)
}

pub fn write_signal_csv(path: &Path, values: &[f64]) -> Result<()> {
    fs::write(path, format_signal_csv(values))?;
    Ok(())
}

/// Loads an 8- or 16-bit grayscale PGM, normalized to `[0, 1]`.
pub fn read_pgm(path: &Path) -> Result<Image> {
    let reader = image::ImageReader::open(path)?.with_guessed_format()?;
    match reader.decode()? {
        DynamicImage::ImageLuma8(buf) => {
            let (w, h) = buf.dimensions();
            Image::new(
                w as usize,
                h as usize,
                buf.into_raw()
                    .into_iter()
                    .map(|v| v as f64 / 255.0)
                    .collect(),
            )
        }
        DynamicImage::ImageLuma16(buf) => {
            let (w, h) = buf.dimensions();
            Image::new(
                w as usize,
                h as usize,
                buf.into_raw()
                    .into_iter()
                    .map(|v| v as f64 / 65535.0)
                    .collect(),
            )
        }
        other => Err(Error::Format(format!(
            "{}: expected a grayscale PGM, got {:?}",
            path.display(),
            other.color()
        ))),
    }
}

/// Writes an 8-bit binary PGM, mapping the image minimum to 0 and the
/// maximum to 255 (a constant image maps to 0).
pub fn write_pgm_preview(path: &Path, img: &Image) -> Result<()> {
    let (lo, hi) = img
        .pixels()
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let bytes: Vec<u8> = img
        .pixels()
        .iter()
        .map(|&v| {
            if span > 0.0 {
                ((v - lo) / span * 255.0).round() as u8
            } else {
                0
            }
        })
        .collect();
    write_pgm8(path, img.width(), img.height(), &bytes)
}

/// Writes `[0, 1]` intensities as an 8-bit binary PGM (values clamped).
pub fn write_pgm(path: &Path, img: &Image) -> Result<()> {
    let bytes: Vec<u8> = img
        .pixels()
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    write_pgm8(path, img.width(), img.height(), &bytes)
}

fn write_pgm8(path: &Path, width: usize, height: usize, bytes: &[u8]) -> Result<()> {
    let file = BufWriter::new(fs::File::create(path)?);
    PnmEncoder::new(file)
        .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
        .write_image(bytes, width as u32, height as u32, ExtendedColorType::L8)?;
    Ok(())
}

/// Sidecar describing a raw `f32` stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawSidecar {
    pub width: usize,
    pub height: usize,
    pub frames: usize,
}

/// `foo.f32` -> `foo.json`.
pub fn sidecar_path(raw: &Path) -> PathBuf {
    raw.with_extension("json")
}

/// Writes frames back to back as little-endian `f32` plus the sidecar.
pub fn write_raw_stack(path: &Path, frames: &[Image]) -> Result<()> {
    let first = frames
        .first()
        .ok_or_else(|| Error::invalid("no frames to write"))?;
    let mut out = BufWriter::new(fs::File::create(path)?);
    for frame in frames {
        if !frame.same_shape(first) {
            return Err(Error::DimensionMismatch(
                "raw stack frames differ in size".into(),
            ));
        }
        for &v in frame.pixels() {
            out.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    out.flush()?;
    let sidecar = RawSidecar {
        width: first.width(),
        height: first.height(),
        frames: frames.len(),
    };
    fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)?)?;
    Ok(())
}

pub fn read_raw_stack(path: &Path) -> Result<FrameStream> {
    let sidecar: RawSidecar = serde_json::from_str(&fs::read_to_string(sidecar_path(path))?)?;
    let bytes = fs::read(path)?;
    let plane = sidecar.width * sidecar.height;
    let expected = plane * sidecar.frames * 4;
    if bytes.len() != expected {
        return Err(Error::Format(format!(
            "{}: expected {expected} bytes from sidecar, found {}",
            path.display(),
            bytes.len()
        )));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    let frames = values
        .chunks_exact(plane.max(1))
        .map(|chunk| Image::new(sidecar.width, sidecar.height, chunk.to_vec()))
        .collect::<Result<Vec<_>>>()?;
    FrameStream::new(frames)
}

/// Loads every `.pgm` file in `dir`, in lexicographic filename order.
pub fn read_frame_dir(dir: &Path) -> Result<FrameStream> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| e.eq_ignore_ascii_case("pgm"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(Error::Format(format!(
            "{}: no .pgm frames found",
            dir.display()
        )));
    }
    FrameStream::new(
        paths
            .iter()
            .map(|p| read_pgm(p))
            .collect::<Result<Vec<_>>>()?,
    )
}

/// A frame directory, or a raw `.f32` stack with its sidecar.
pub fn read_frames(path: &Path) -> Result<FrameStream> {
    if path.is_dir() {
        read_frame_dir(path)
    } else {
        read_raw_stack(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signal_csv_parsing() {
        assert_eq!(
            parse_signal_csv("1\n# note\n\n2.5\n-3e-2\n").unwrap(),
            vec![1.0, 2.5, -0.03]
        );
        assert!(parse_signal_csv("1\nabc\n").is_err());
        assert_eq!(format_signal_csv(&[1.0, 0.25]), "1\n0.25\n");
    }

    #[test]
    fn pgm_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.pgm");
        let img = Image::from_fn(7, 5, |x, y| ((x + y) % 3) as f64 / 2.0).unwrap();
        write_pgm(&path, &img).unwrap();
        let back = read_pgm(&path).unwrap();
        for (a, b) in img.pixels().iter().zip(back.pixels()) {
            assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
        }
    }

    #[test]
    fn sixteen_bit_pgm_is_normalized() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.pgm");
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0xff, 0xff, 0x80, 0x00]);
        fs::write(&path, bytes).unwrap();
        let img = read_pgm(&path).unwrap();
        assert_eq!(img.pixels()[0], 1.0);
        assert!((img.pixels()[1] - 32768.0 / 65535.0).abs() < 1e-12);
    }

    #[test]
    fn raw_stack_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("stack.f32");
        let frames: Vec<Image> = (0..3)
            .map(|n| Image::from_fn(4, 2, |x, y| x as f64 - y as f64 * 0.5 + n as f64).unwrap())
            .collect();
        write_raw_stack(&path, &frames).unwrap();
        let sidecar: RawSidecar =
            serde_json::from_str(&fs::read_to_string(dir.path().join("stack.json")).unwrap())
                .unwrap();
        assert_eq!(
            sidecar,
            RawSidecar {
                width: 4,
                height: 2,
                frames: 3
            }
        );
        let back = read_raw_stack(&path).unwrap();
        assert_eq!(back.frames(), &frames[..]);
    }

    #[test]
    fn raw_stack_size_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.f32");
        fs::write(&path, [0u8; 10]).unwrap();
        fs::write(sidecar_path(&path), r#"{"width":2,"height":2,"frames":1}"#).unwrap();
        assert!(read_raw_stack(&path).is_err());
    }

    #[test]
    fn frame_dir_is_sorted() {
        let dir = tempfile::tempdir().unwrap();
        for (name, v) in [("b.pgm", 1.0), ("a.pgm", 0.0), ("c.txt", 0.5)] {
            if name.ends_with("pgm") {
                write_pgm(&dir.path().join(name), &Image::filled(2, 2, v).unwrap()).unwrap();
            } else {
                fs::write(dir.path().join(name), "x").unwrap();
            }
        }
        let stream = read_frame_dir(dir.path()).unwrap();
        assert_eq!(stream.len(), 2);
        assert_eq!(stream.frames()[0].get(0, 0), 0.0);
        assert_eq!(stream.frames()[1].get(0, 0), 1.0);
    }
}
