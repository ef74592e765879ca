use ndarray::{Array2, Array3, Array4};

use crate::error::{shape_err, validation_err, Result};
use crate::model::{IGNORE_INDEX, SPECTRAL_CHANNELS};

/// Class names in label order.
pub const CLASS_NAMES: [&str; 6] = ["Imp-suf", "Building", "Low-veg", "Tree", "Car", "Clutter"];
pub const NUM_CLASSES: usize = CLASS_NAMES.len();
pub const CLUTTER: usize = 5;

/// Co-registered spectral, DSM and label rasters of one area.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiModalTile {
    pub tile_id: String,
    /// `(4, H, W)`, bands NIR, R, G, B, values in [0, 1].
    pub spectral: Array3<f32>,
    /// `(1, H, W)`, per-tile min-max normalized height in [0, 1].
    pub dsm: Array3<f32>,
    /// `(H, W)`, class indices or [`IGNORE_INDEX`].
    pub labels: Array2<u8>,
}

impl MultiModalTile {
    pub fn new(
        tile_id: impl Into<String>,
        spectral: Array3<f32>,
        dsm: Array3<f32>,
        labels: Array2<u8>,
    ) -> Result<Self> {
        let tile = MultiModalTile {
            tile_id: tile_id.into(),
            spectral,
            dsm,
            labels,
        };
        tile.validate(NUM_CLASSES)?;
        Ok(tile)
    }

    pub fn height(&self) -> usize {
        self.labels.nrows()
    }

    pub fn width(&self) -> usize {
        self.labels.ncols()
    }

    pub fn validate(&self, num_classes: usize) -> Result<()> {
        let (h, w) = self.labels.dim();
        let (sc, sh, sw) = self.spectral.dim();
        let (dc, dh, dw) = self.dsm.dim();
        if sc != SPECTRAL_CHANNELS || dc != 1 {
            return Err(shape_err!(
                "tile {}: expected 4 spectral bands and 1 DSM band, got {sc} and {dc}",
                self.tile_id
            ));
        }
        if (sh, sw) != (h, w) || (dh, dw) != (h, w) {
            return Err(shape_err!(
                "tile {}: rasters are not co-registered (spectral {sh}x{sw}, dsm {dh}x{dw}, labels {h}x{w})",
                self.tile_id
            ));
        }
        if let Some(bad) = self
            .labels
            .iter()
            .find(|&&l| l != IGNORE_INDEX && l as usize >= num_classes)
        {
            return Err(validation_err!("tile {}: label {bad} out of range", self.tile_id));
        }
        if self.spectral.iter().chain(self.dsm.iter()).any(|v| !v.is_finite()) {
            return Err(validation_err!("tile {}: non-finite raster value", self.tile_id));
        }
        Ok(())
    }
}

/// Stacks tiles of equal size into network inputs:
/// spectral `(B, 4, H, W)`, DSM `(B, 1, H, W)` and labels `(B, H, W)`.
pub fn stack_batch(tiles: &[&MultiModalTile]) -> Result<(Array4<f32>, Array4<f32>, Array3<u8>)> {
    let first = tiles.first().ok_or_else(|| validation_err!("empty batch"))?;
    let (h, w) = (first.height(), first.width());
    let b = tiles.len();
    let mut spectral = Array4::zeros((b, SPECTRAL_CHANNELS, h, w));
    let mut dsm = Array4::zeros((b, 1, h, w));
    let mut labels = Array3::zeros((b, h, w));
    for (i, t) in tiles.iter().enumerate() {
        if (t.height(), t.width()) != (h, w) {
            return Err(shape_err!(
                "batch tiles differ in size: {}x{} vs {}x{}",
                h,
                w,
                t.height(),
                t.width()
            ));
        }
        spectral.slice_mut(ndarray::s![i, .., .., ..]).assign(&t.spectral);
        dsm.slice_mut(ndarray::s![i, .., .., ..]).assign(&t.dsm);
        labels.slice_mut(ndarray::s![i, .., ..]).assign(&t.labels);
    }
    Ok((spectral, dsm, labels))
}
