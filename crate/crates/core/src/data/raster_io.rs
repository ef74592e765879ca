//! PNG encodings of the three modalities.
//!
//! * spectral: 16-bit RGBA, samples in band order NIR, R, G, B;
//! * DSM: 16-bit grayscale;
//! * labels: 8-bit indexed color with a fixed 256-entry palette.
//!
//! Real values in [0, 1] are quantized to `round(v * 65535)`.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::Path;

use ndarray::{Array2, Array3};

use crate::error::{Error, Result};

fn png_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::Png {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn quantize(v: f32) -> u16 {
    (v.clamp(0.0, 1.0) * 65535.0).round() as u16
}

fn dequantize(v: u16) -> f32 {
    f32::from(v) / 65535.0
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?))
}

fn write_png(
    path: &Path,
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    palette: Option<Vec<u8>>,
    data: &[u8],
) -> Result<()> {
    let mut enc = png::Encoder::new(create(path)?, width as u32, height as u32);
    enc.set_color(color);
    enc.set_depth(depth);
    if let Some(p) = palette {
        enc.set_palette(p);
    }
    let mut writer = enc.write_header().map_err(|e| png_err(path, e))?;
    writer.write_image_data(data).map_err(|e| png_err(path, e))?;
    writer.finish().map_err(|e| png_err(path, e))
}

struct Decoded {
    info: png::OutputInfo,
    data: Vec<u8>,
}

fn read_png(path: &Path, expand_palette: bool) -> Result<Decoded> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut dec = png::Decoder::new(BufReader::new(file));
    dec.set_transformations(if expand_palette {
        png::Transformations::EXPAND
    } else {
        png::Transformations::IDENTITY
    });
    let mut reader = dec.read_info().map_err(|e| png_err(path, e))?;
    let mut data = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut data).map_err(|e| png_err(path, e))?;
    data.truncate(info.buffer_size());
    Ok(Decoded { info, data })
}

pub fn write_spectral(path: &Path, spectral: &Array3<f32>) -> Result<()> {
    let (bands, h, w) = spectral.dim();
    if bands != 4 {
        return Err(png_err(path, format!("expected 4 spectral bands, got {bands}")));
    }
    let mut bytes = Vec::with_capacity(h * w * 8);
    for y in 0..h {
        for x in 0..w {
            for b in 0..4 {
                bytes.extend_from_slice(&quantize(spectral[[b, y, x]]).to_be_bytes());
            }
        }
    }
    write_png(path, w, h, png::ColorType::Rgba, png::BitDepth::Sixteen, None, &bytes)
}

pub fn read_spectral(path: &Path) -> Result<Array3<f32>> {
    let d = read_png(path, false)?;
    if d.info.color_type != png::ColorType::Rgba || d.info.bit_depth != png::BitDepth::Sixteen {
        return Err(png_err(path, "spectral raster must be 16-bit RGBA"));
    }
    let (w, h) = (d.info.width as usize, d.info.height as usize);
    Ok(Array3::from_shape_fn((4, h, w), |(b, y, x)| {
        let i = ((y * w + x) * 4 + b) * 2;
        dequantize(u16::from_be_bytes([d.data[i], d.data[i + 1]]))
    }))
}

pub fn write_dsm(path: &Path, dsm: &Array3<f32>) -> Result<()> {
    let (bands, h, w) = dsm.dim();
    if bands != 1 {
        return Err(png_err(path, format!("expected 1 DSM band, got {bands}")));
    }
    let bytes: Vec<u8> = dsm.iter().flat_map(|&v| quantize(v).to_be_bytes()).collect();
    write_png(path, w, h, png::ColorType::Grayscale, png::BitDepth::Sixteen, None, &bytes)
}

pub fn read_dsm(path: &Path) -> Result<Array3<f32>> {
    let d = read_png(path, false)?;
    if d.info.color_type != png::ColorType::Grayscale || d.info.bit_depth != png::BitDepth::Sixteen {
        return Err(png_err(path, "DSM raster must be 16-bit grayscale"));
    }
    let (w, h) = (d.info.width as usize, d.info.height as usize);
    Ok(Array3::from_shape_fn((1, h, w), |(_, y, x)| {
        let i = (y * w + x) * 2;
        dequantize(u16::from_be_bytes([d.data[i], d.data[i + 1]]))
    }))
}

/// Display colors for class indices; index 255 (ignore) is black.
pub fn label_palette() -> Vec<u8> {
    const COLORS: [[u8; 3]; 6] = [
        [255, 255, 255],
        [0, 0, 255],
        [0, 255, 255],
        [0, 255, 0],
        [255, 255, 0],
        [255, 0, 0],
    ];
    let mut p = vec![0u8; 256 * 3];
    for (i, c) in COLORS.iter().enumerate() {
        p[i * 3..i * 3 + 3].copy_from_slice(c);
    }
    p
}

pub fn write_labels(path: &Path, labels: &Array2<u8>) -> Result<()> {
    let (h, w) = labels.dim();
    let bytes: Vec<u8> = labels.iter().copied().collect();
    write_png(
        path,
        w,
        h,
        png::ColorType::Indexed,
        png::BitDepth::Eight,
        Some(label_palette()),
        &bytes,
    )
}

pub fn read_labels(path: &Path) -> Result<Array2<u8>> {
    let d = read_png(path, false)?;
    let ok_color = matches!(d.info.color_type, png::ColorType::Indexed | png::ColorType::Grayscale);
    if !ok_color || d.info.bit_depth != png::BitDepth::Eight {
        return Err(png_err(path, "label raster must be 8-bit indexed"));
    }
    let (w, h) = (d.info.width as usize, d.info.height as usize);
    Array2::from_shape_vec((h, w), d.data).map_err(|e| png_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rasters_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spectral = Array3::from_shape_fn((4, 5, 7), |(b, y, x)| ((b * 35 + y * 7 + x) as f32) / 140.0);
        let dsm = Array3::from_shape_fn((1, 5, 7), |(_, y, x)| ((y * 7 + x) as f32) / 34.0);
        let labels = Array2::from_shape_fn((5, 7), |(y, x)| if x == 6 { 255 } else { ((y + x) % 6) as u8 });

        write_spectral(&dir.path().join("s.png"), &spectral).unwrap();
        write_dsm(&dir.path().join("d.png"), &dsm).unwrap();
        write_labels(&dir.path().join("l.png"), &labels).unwrap();

        let s2 = read_spectral(&dir.path().join("s.png")).unwrap();
        let d2 = read_dsm(&dir.path().join("d.png")).unwrap();
        assert_eq!(read_labels(&dir.path().join("l.png")).unwrap(), labels);
        for (a, b) in spectral.iter().zip(&s2).chain(dsm.iter().zip(&d2)) {
            assert!((a - b).abs() <= 0.5 / 65535.0 + 1e-7);
        }
        // A second pass through the quantizer is exact.
        write_spectral(&dir.path().join("s2.png"), &s2).unwrap();
        assert_eq!(read_spectral(&dir.path().join("s2.png")).unwrap(), s2);
    }

    #[test]
    fn wrong_format_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let labels = Array2::from_elem((4, 4), 1u8);
        write_labels(&dir.path().join("l.png"), &labels).unwrap();
        assert!(read_spectral(&dir.path().join("l.png")).is_err());
    }
}
