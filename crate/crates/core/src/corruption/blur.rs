use ndarray::{Array2, Array3};

use super::mask::Region;
use crate::error::{validation_err, Result};

/// Normalized linear motion kernel of odd side `length`: a Bresenham line
/// through the center at `angle` radians, entries summing to 1.
/// Even lengths are rounded up to the next odd value.
pub fn motion_kernel(length: usize, angle: f64) -> Result<Array2<f64>> {
    if length == 0 {
        return Err(validation_err!("motion kernel length must be >= 1"));
    }
    let n = if length % 2 == 0 { length + 1 } else { length };
    let c = (n / 2) as i64;
    let dx = (c as f64 * angle.cos()).round() as i64;
    let dy = (c as f64 * angle.sin()).round() as i64;
    let mut k = Array2::zeros((n, n));
    for (x, y) in bresenham((c - dx, c - dy), (c + dx, c + dy)) {
        k[[y as usize, x as usize]] = 1.0;
    }
    let total: f64 = k.sum();
    Ok(k / total)
}

fn bresenham((x0, y0): (i64, i64), (x1, y1): (i64, i64)) -> Vec<(i64, i64)> {
    let dx = (x1 - x0).abs();
    let dy = -(y1 - y0).abs();
    let sx = if x0 < x1 { 1 } else { -1 };
    let sy = if y0 < y1 { 1 } else { -1 };
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    let mut pts = Vec::new();
    loop {
        pts.push((x, y));
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
    pts
}

/// Mirror index into `[0, n)` without repeating the edge sample.
fn reflect(i: i64, n: usize) -> usize {
    if n == 1 {
        return 0;
    }
    let period = 2 * (n as i64 - 1);
    let m = i.rem_euclid(period);
    (if m >= n as i64 { period - m } else { m }) as usize
}

fn check_region(image: &Array3<f32>, region: &Region) -> Result<bool> {
    let (_, h, w) = image.dim();
    if !region.fits(h, w) {
        return Err(validation_err!(
            "region {}x{} at ({}, {}) exceeds the {h}x{w} raster",
            region.height,
            region.width,
            region.top,
            region.left
        ));
    }
    if region.is_empty() {
        log::warn!("empty damage region; leaving the image unchanged");
        return Ok(false);
    }
    Ok(true)
}

/// Convolves the pixels inside `region` with a motion kernel. Samples
/// falling outside the region's bounding box are reflected back into it.
/// Pixels outside the region are unchanged.
pub fn motion_blur(image: &Array3<f32>, region: &Region, length: usize, angle: f64) -> Result<Array3<f32>> {
    let kernel = motion_kernel(length, angle)?;
    let mut out = image.clone();
    if !check_region(image, region)? || kernel.len() == 1 {
        return Ok(out);
    }
    let c = (kernel.nrows() / 2) as i64;
    let taps: Vec<(i64, i64, f64)> = kernel
        .indexed_iter()
        .filter(|(_, &v)| v > 0.0)
        .map(|((ky, kx), &v)| (ky as i64 - c, kx as i64 - c, v))
        .collect();
    let (bands, _, _) = image.dim();
    for (y, x) in region.pixels() {
        let ly = (y - region.top) as i64;
        let lx = (x - region.left) as i64;
        for b in 0..bands {
            let mut acc = 0.0f64;
            for &(oy, ox, wgt) in &taps {
                let sy = region.top + reflect(ly + oy, region.height);
                let sx = region.left + reflect(lx + ox, region.width);
                acc += wgt * f64::from(image[[b, sy, sx]]);
            }
            out[[b, y, x]] = (acc as f32).clamp(0.0, 1.0);
        }
    }
    Ok(out)
}

/// Sets every band to `value` inside `region`.
pub fn area_fill(image: &Array3<f32>, region: &Region, value: f32) -> Result<Array3<f32>> {
    let mut out = image.clone();
    if !check_region(image, region)? {
        return Ok(out);
    }
    let (bands, _, _) = image.dim();
    for (y, x) in region.pixels() {
        for b in 0..bands {
            out[[b, y, x]] = value;
        }
    }
    Ok(out)
}

/// Deletes colors inside `region` (all bands set to 0).
pub fn area_delete(image: &Array3<f32>, region: &Region) -> Result<Array3<f32>> {
    area_fill(image, region, 0.0)
}
