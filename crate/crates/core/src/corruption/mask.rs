use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{CorruptionSpec, MAX_DAMAGE_FRACTION};
use crate::error::{validation_err, Result};
use crate::seeding::rng_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegionShape {
    Rectangle,
    /// Ellipse inscribed in the region's bounding box.
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DamageKind {
    Blur,
    Delete,
}

/// An axis-aligned damaged area. Coordinates are pixel rows/columns; the
/// bounding box is `[top, top + height) x [left, left + width)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub kind: DamageKind,
    pub shape: RegionShape,
    pub top: usize,
    pub left: usize,
    pub height: usize,
    pub width: usize,
    /// Motion kernel length (blur regions).
    pub blur_length: usize,
    /// Motion direction in radians, in [0, pi) (blur regions).
    pub blur_angle: f64,
}

impl Region {
    pub fn rect(top: usize, left: usize, height: usize, width: usize, kind: DamageKind) -> Self {
        Region {
            kind,
            shape: RegionShape::Rectangle,
            top,
            left,
            height,
            width,
            blur_length: 1,
            blur_angle: 0.0,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.height == 0 || self.width == 0
    }

    /// Whether absolute pixel `(y, x)` belongs to the region.
    pub fn contains(&self, y: usize, x: usize) -> bool {
        if y < self.top || x < self.left || y >= self.top + self.height || x >= self.left + self.width {
            return false;
        }
        match self.shape {
            RegionShape::Rectangle => true,
            RegionShape::Ellipse => {
                let cy = (self.height as f64) / 2.0;
                let cx = (self.width as f64) / 2.0;
                let dy = (y - self.top) as f64 + 0.5 - cy;
                let dx = (x - self.left) as f64 + 0.5 - cx;
                (dy / cy).powi(2) + (dx / cx).powi(2) <= 1.0
            }
        }
    }

    /// All absolute pixels of the region, row-major.
    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.top..self.top + self.height)
            .flat_map(move |y| (self.left..self.left + self.width).map(move |x| (y, x)))
            .filter(move |&(y, x)| self.contains(y, x))
    }

    pub fn fits(&self, height: usize, width: usize) -> bool {
        self.top + self.height <= height && self.left + self.width <= width
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DamageMask {
    /// `(H, W)`, true where any region applies.
    pub mask: Array2<bool>,
    pub regions: Vec<Region>,
}

impl DamageMask {
    pub fn damaged_pixels(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    pub fn fraction(&self) -> f64 {
        self.damaged_pixels() as f64 / self.mask.len().max(1) as f64
    }
}

/// Internal stopping tolerance, as a fraction of the tile area.
const BUDGET_SLACK: f64 = 0.005;
const MAX_ATTEMPTS: usize = 20_000;

/// Samples regions greedily until the damaged-pixel count is within a small
/// slack of `h * w * damage_fraction`.
///
/// The stream is seeded from `splitmix64(spec.seed ^ fnv1a64(tile_id))`, so
/// the result depends only on the spec and the tile id. Region kinds are
/// chosen to keep the blurred share of damaged pixels close to `blur_share`.
pub fn sample_damage_mask(h: usize, w: usize, spec: &CorruptionSpec, tile_id: &str) -> Result<DamageMask> {
    if h < 32 || w < 32 {
        return Err(validation_err!("damage masks need tiles of at least 32x32, got {h}x{w}"));
    }
    if !(0.0..=MAX_DAMAGE_FRACTION).contains(&spec.damage_fraction) {
        return Err(validation_err!(
            "damage fraction {} is outside [0, {MAX_DAMAGE_FRACTION}]",
            spec.damage_fraction
        ));
    }
    spec.validate()?;

    let mut mask = Array2::from_elem((h, w), false);
    let mut regions = Vec::new();
    let area = (h * w) as f64;
    let target = (area * spec.damage_fraction).round() as usize;
    if target == 0 {
        return Ok(DamageMask { mask, regions });
    }
    let slack = (area * BUDGET_SLACK).floor() as usize;

    let mut rng = rng_for(spec.seed, tile_id);
    let (side_lo, side_hi) = spec.region_side_range;
    let (klo, khi) = spec.kernel_length_range;
    let mut covered = 0usize;
    let mut blurred = 0usize;

    for _ in 0..MAX_ATTEMPTS {
        if covered + slack >= target {
            break;
        }
        let remaining = target - covered;
        let kind = if spec.blur_share >= 1.0 {
            DamageKind::Blur
        } else if spec.blur_share <= 0.0 {
            DamageKind::Delete
        } else if (blurred as f64) <= spec.blur_share * covered as f64 {
            DamageKind::Blur
        } else {
            DamageKind::Delete
        };
        let shape = spec.region_shapes[rng.gen_range(0..spec.region_shapes.len())];
        let mut rh = rng.gen_range(side_lo..=side_hi).min(h);
        let mut rw = rng.gen_range(side_lo..=side_hi).min(w);
        let nominal = match shape {
            RegionShape::Rectangle => (rh * rw) as f64,
            RegionShape::Ellipse => std::f64::consts::FRAC_PI_4 * (rh * rw) as f64,
        };
        if nominal > remaining as f64 {
            let s = (remaining as f64 / nominal).sqrt();
            rh = ((rh as f64 * s).floor() as usize).max(1);
            rw = ((rw as f64 * s).floor() as usize).max(1);
        }
        let top = rng.gen_range(0..=h - rh);
        let left = rng.gen_range(0..=w - rw);
        let mut length = rng.gen_range(klo..=khi);
        if length % 2 == 0 {
            length += 1;
        }
        let angle = rng.gen_range(0.0..std::f64::consts::PI);
        let region = Region {
            kind,
            shape,
            top,
            left,
            height: rh,
            width: rw,
            blur_length: length,
            blur_angle: angle,
        };
        let fresh = region.pixels().filter(|&(y, x)| !mask[[y, x]]).count();
        if fresh == 0 || covered + fresh > target + slack {
            continue;
        }
        for (y, x) in region.pixels() {
            mask[[y, x]] = true;
        }
        covered += fresh;
        if kind == DamageKind::Blur {
            blurred += fresh;
        }
        regions.push(region);
    }
    Ok(DamageMask { mask, regions })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_fraction_gives_empty_mask() {
        let m = sample_damage_mask(64, 64, &CorruptionSpec::new(0.0, 1), "a").unwrap();
        assert_eq!(m.damaged_pixels(), 0);
        assert!(m.regions.is_empty());
    }

    #[test]
    fn same_seed_and_tile_is_bit_identical() {
        let spec = CorruptionSpec::new(0.3, 77);
        let a = sample_damage_mask(256, 256, &spec, "tile-9").unwrap();
        let b = sample_damage_mask(256, 256, &spec, "tile-9").unwrap();
        assert_eq!(a, b);
        let c = sample_damage_mask(256, 256, &spec, "tile-10").unwrap();
        assert_ne!(a.mask, c.mask);
    }

    #[test]
    fn regions_stay_inside_the_raster() {
        let m = sample_damage_mask(40, 70, &CorruptionSpec::new(0.5, 3), "small").unwrap();
        assert!(m.regions.iter().all(|r| r.fits(40, 70) && !r.is_empty()));
    }

    #[test]
    fn blur_share_extremes_pick_one_kind() {
        let mut spec = CorruptionSpec::new(0.3, 5);
        spec.blur_share = 1.0;
        let m = sample_damage_mask(128, 128, &spec, "x").unwrap();
        assert!(m.regions.iter().all(|r| r.kind == DamageKind::Blur));
        spec.blur_share = 0.0;
        let m = sample_damage_mask(128, 128, &spec, "x").unwrap();
        assert!(m.regions.iter().all(|r| r.kind == DamageKind::Delete));
    }

    #[test]
    fn rejects_impossible_budget_and_tiny_tiles() {
        assert!(sample_damage_mask(64, 64, &CorruptionSpec::new(0.51, 0), "a").is_err());
        assert!(sample_damage_mask(16, 64, &CorruptionSpec::new(0.1, 0), "a").is_err());
    }

    #[test]
    fn ellipse_is_inside_its_box() {
        let r = Region {
            shape: RegionShape::Ellipse,
            ..Region::rect(2, 3, 10, 20, DamageKind::Delete)
        };
        let n = r.pixels().count();
        assert!(n > 0 && n < 200);
        assert!(!r.contains(2, 3));
        assert!(r.contains(7, 13));
    }
}
