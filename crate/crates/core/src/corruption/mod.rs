//! Synthetic blur and damage of spectral rasters.
//!
//! A [`CorruptionSpec`] fixes the damaged-area budget and the randomness;
//! [`sample_damage_mask`] turns it into concrete regions for one tile, and
//! [`corrupt`] applies them. DSM and labels are never touched.

mod blur;
mod mask;

use serde::{Deserialize, Serialize};

use crate::data::MultiModalTile;
use crate::error::{validation_err, Result};

pub use blur::{area_delete, area_fill, motion_blur, motion_kernel};
pub use mask::{sample_damage_mask, DamageKind, DamageMask, Region, RegionShape};

/// Largest damaged fraction supported.
pub const MAX_DAMAGE_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    /// Fraction of tile pixels to damage, in [0, 0.5].
    pub damage_fraction: f64,
    /// Share of the damaged pixels that are blurred rather than deleted.
    pub blur_share: f64,
    /// Inclusive range of motion-kernel lengths in pixels.
    pub kernel_length_range: (usize, usize),
    /// Inclusive range of region side lengths in pixels.
    pub region_side_range: (usize, usize),
    pub region_shapes: Vec<RegionShape>,
    /// Value written into deleted regions.
    pub fill_value: f32,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        CorruptionSpec {
            damage_fraction: 0.0,
            blur_share: 0.5,
            kernel_length_range: (5, 25),
            region_side_range: (16, 128),
            region_shapes: vec![RegionShape::Rectangle, RegionShape::Ellipse],
            fill_value: 0.0,
            seed: 0,
        }
    }
}

impl CorruptionSpec {
    pub fn new(damage_fraction: f64, seed: u64) -> Self {
        CorruptionSpec {
            damage_fraction,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_DAMAGE_FRACTION).contains(&self.damage_fraction) {
            return Err(validation_err!(
                "damage fraction {} outside [0, {MAX_DAMAGE_FRACTION}]",
                self.damage_fraction
            ));
        }
        if !(0.0..=1.0).contains(&self.blur_share) {
            return Err(validation_err!("blur_share {} outside [0, 1]", self.blur_share));
        }
        let (klo, khi) = self.kernel_length_range;
        if klo == 0 || klo > khi {
            return Err(validation_err!("invalid kernel length range ({klo}, {khi})"));
        }
        let (slo, shi) = self.region_side_range;
        if slo == 0 || slo > shi {
            return Err(validation_err!("invalid region side range ({slo}, {shi})"));
        }
        if self.region_shapes.is_empty() {
            return Err(validation_err!("at least one region shape is required"));
        }
        if !(0.0..=1.0).contains(&self.fill_value) {
            return Err(validation_err!("fill value {} outside [0, 1]", self.fill_value));
        }
        Ok(())
    }
}

/// Damages the spectral bands of `tile` and returns the result with the mask used.
pub fn corrupt_with_mask(tile: &MultiModalTile, spec: &CorruptionSpec) -> Result<(MultiModalTile, DamageMask)> {
    spec.validate()?;
    let mask = sample_damage_mask(tile.height(), tile.width(), spec, &tile.tile_id)?;
    let mut spectral = tile.spectral.clone();
    for region in mask.regions.iter().filter(|r| r.kind == DamageKind::Blur) {
        spectral = motion_blur(&spectral, region, region.blur_length, region.blur_angle)?;
    }
    for region in mask.regions.iter().filter(|r| r.kind == DamageKind::Delete) {
        spectral = area_fill(&spectral, region, spec.fill_value)?;
    }
    let out = MultiModalTile {
        tile_id: tile.tile_id.clone(),
        spectral,
        dsm: tile.dsm.clone(),
        labels: tile.labels.clone(),
    };
    Ok((out, mask))
}

/// Damages the spectral bands of `tile`. A pure function of `(tile, spec)`.
pub fn corrupt(tile: &MultiModalTile, spec: &CorruptionSpec) -> Result<MultiModalTile> {
    corrupt_with_mask(tile, spec).map(|(t, _)| t)
}
