use ndarray::s;

use super::MultiModalTile;
use crate::error::{shape_err, validation_err, Result};
use crate::model::SPATIAL_MULTIPLE;

/// Window start offsets along one axis: regular steps of `stride`, plus one
/// final window flush with the far edge if the steps leave a remainder.
pub fn window_starts(size: usize, patch: usize, stride: usize) -> Vec<usize> {
    if patch > size || stride == 0 {
        return Vec::new();
    }
    let mut starts: Vec<usize> = (0..).map(|i| i * stride).take_while(|&s| s + patch <= size).collect();
    let last = size - patch;
    if starts.last() != Some(&last) {
        starts.push(last);
    }
    starts
}

/// A patch window: grid position plus pixel origin.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub row: usize,
    pub col: usize,
    pub top: usize,
    pub left: usize,
    pub size: usize,
}

pub fn windows(height: usize, width: usize, patch: usize, stride: usize) -> Result<Vec<Window>> {
    if patch == 0 || patch % SPATIAL_MULTIPLE != 0 {
        return Err(validation_err!(
            "patch size {patch} must be a positive multiple of {SPATIAL_MULTIPLE}"
        ));
    }
    if stride == 0 {
        return Err(validation_err!("stride must be >= 1"));
    }
    if patch > height || patch > width {
        return Err(shape_err!(
            "patch {patch} exceeds the {height}x{width} raster; pad the raster to at least {patch}x{patch}"
        ));
    }
    let rows = window_starts(height, patch, stride);
    let cols = window_starts(width, patch, stride);
    Ok(rows
        .iter()
        .enumerate()
        .flat_map(|(r, &top)| {
            cols.iter().enumerate().map(move |(c, &left)| Window {
                row: r,
                col: c,
                top,
                left,
                size: patch,
            })
        })
        .collect())
}

pub fn extract(tile: &MultiModalTile, win: &Window) -> MultiModalTile {
    let (y0, x0, n) = (win.top, win.left, win.size);
    MultiModalTile {
        tile_id: format!("{}#{},{}", tile.tile_id, win.row, win.col),
        spectral: tile.spectral.slice(s![.., y0..y0 + n, x0..x0 + n]).to_owned(),
        dsm: tile.dsm.slice(s![.., y0..y0 + n, x0..x0 + n]).to_owned(),
        labels: tile.labels.slice(s![y0..y0 + n, x0..x0 + n]).to_owned(),
    }
}

/// Cuts a tile into `patch x patch` windows at `stride`, with edge-aligned
/// final windows so every pixel is covered. Child ids are `parent#row,col`.
pub fn tile_raster(tile: &MultiModalTile, patch: usize, stride: usize) -> Result<Vec<MultiModalTile>> {
    let wins = windows(tile.height(), tile.width(), patch, stride)?;
    Ok(wins.iter().map(|w| extract(tile, w)).collect())
}
