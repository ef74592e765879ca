use ndarray::{Array2, Array3, Axis};

use super::MultiModalTile;
use crate::error::{validation_err, Result};

/// One clockwise quarter turn: `out[c][H - 1 - r] = in[r][c]`.
fn rot90_plane<T: Copy>(a: &Array2<T>) -> Array2<T> {
    let n = a.nrows();
    Array2::from_shape_fn((n, n), |(i, j)| a[[n - 1 - j, i]])
}

fn rot90_bands<T: Copy + Default>(a: &Array3<T>) -> Array3<T> {
    let mut out = a.clone();
    for (mut o, band) in out.axis_iter_mut(Axis(0)).zip(a.axis_iter(Axis(0))) {
        o.assign(&rot90_plane(&band.to_owned()));
    }
    out
}

/// Rotates every modality of a square tile by `k` clockwise quarter turns.
pub fn augment_rotate(tile: &MultiModalTile, k: usize) -> Result<MultiModalTile> {
    if tile.height() != tile.width() {
        return Err(validation_err!(
            "rotation needs a square tile, {} is {}x{}",
            tile.tile_id,
            tile.height(),
            tile.width()
        ));
    }
    let mut out = tile.clone();
    for _ in 0..k % 4 {
        out.spectral = rot90_bands(&out.spectral);
        out.dsm = rot90_bands(&out.dsm);
        out.labels = rot90_plane(&out.labels);
    }
    Ok(out)
}
