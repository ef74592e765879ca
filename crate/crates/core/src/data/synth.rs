//! Procedural multimodal scenes used in place of real aerial tiles.
//!
//! A scene is a Voronoi partition over seeded sites, each cell assigned a
//! class, plus a handful of small car-sized rectangles. Spectral values are
//! class means plus Gaussian noise; the DSM lifts buildings and trees above
//! a gently sloping ground and is min-max normalized per tile.

use ndarray::{Array2, Array3};
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::manifest::{DatasetManifest, Split, TileRecord};
use super::tile::{MultiModalTile, CLASS_NAMES, NUM_CLASSES};
use crate::error::{validation_err, Result};
use crate::model::SPATIAL_MULTIPLE;
use crate::seeding::rng_for;

/// Per-class NIR, R, G, B means.
pub const CLASS_MEANS: [[f32; 4]; NUM_CLASSES] = [
    [0.30, 0.55, 0.55, 0.55],
    [0.40, 0.75, 0.35, 0.30],
    [0.75, 0.35, 0.60, 0.30],
    [0.85, 0.20, 0.40, 0.20],
    [0.20, 0.20, 0.30, 0.80],
    [0.55, 0.85, 0.80, 0.15],
];
/// Per-band spectral noise standard deviation.
pub const SPECTRAL_NOISE: f32 = 0.04;
/// Per-class surface height above ground, in meters.
pub const CLASS_HEIGHT_M: [f32; NUM_CLASSES] = [0.0, 12.0, 0.3, 8.0, 1.5, 0.8];
const HEIGHT_NOISE_M: f32 = 0.3;
const CAR_CLASS: u8 = 4;

/// A generated tile and the raw height range its DSM was normalized from.
#[derive(Debug, Clone)]
pub struct SynthTile {
    pub tile: MultiModalTile,
    pub dsm_range_m: (f32, f32),
}

pub fn synth_scene(size: usize, seed: u64, tile_id: &str) -> SynthTile {
    let mut rng = rng_for(seed, tile_id);
    let n_sites = ((size / SPATIAL_MULTIPLE).pow(2) * 2).max(6);
    let sites: Vec<(f32, f32, u8)> = (0..n_sites)
        .map(|_| {
            (
                rng.gen_range(0.0..size as f32),
                rng.gen_range(0.0..size as f32),
                rng.gen_range(0..NUM_CLASSES as u8),
            )
        })
        .collect();

    let mut labels = Array2::from_shape_fn((size, size), |(y, x)| {
        let (py, px) = (y as f32 + 0.5, x as f32 + 0.5);
        sites
            .iter()
            .map(|&(sy, sx, c)| ((sy - py).powi(2) + (sx - px).powi(2), c))
            .fold((f32::INFINITY, 0u8), |best, cur| if cur.0 < best.0 { cur } else { best })
            .1
    });

    let n_cars = (size / SPATIAL_MULTIPLE).max(1);
    for _ in 0..n_cars {
        let (ch, cw) = if rng.gen_bool(0.5) { (4, 8) } else { (8, 4) };
        let top = rng.gen_range(0..=size - ch);
        let left = rng.gen_range(0..=size - cw);
        labels
            .slice_mut(ndarray::s![top..top + ch, left..left + cw])
            .fill(CAR_CLASS);
    }

    let noise = Normal::new(0.0f32, SPECTRAL_NOISE).unwrap();
    let mut spectral = Array3::zeros((4, size, size));
    for ((b, y, x), v) in spectral.indexed_iter_mut() {
        let mean = CLASS_MEANS[labels[[y, x]] as usize][b];
        *v = (mean + noise.sample(&mut rng)).clamp(0.0, 1.0);
    }

    let slope: f32 = rng.gen_range(0.0..2.0);
    let hnoise = Normal::new(0.0f32, HEIGHT_NOISE_M).unwrap();
    let raw = Array2::from_shape_fn((size, size), |(y, x)| {
        let ground = slope * (x + y) as f32 / (2 * size) as f32;
        ground + CLASS_HEIGHT_M[labels[[y, x]] as usize] + hnoise.sample(&mut rng)
    });
    let lo = raw.iter().copied().fold(f32::INFINITY, f32::min);
    let hi = raw.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let span = (hi - lo).max(f32::EPSILON);
    let dsm = raw.mapv(|v| (v - lo) / span).insert_axis(ndarray::Axis(0));

    SynthTile {
        tile: MultiModalTile {
            tile_id: tile_id.to_string(),
            spectral,
            dsm,
            labels,
        },
        dsm_range_m: (lo, hi),
    }
}

/// Convenience wrapper returning just the tile.
pub fn synth_tile(size: usize, seed: u64, tile_id: &str) -> MultiModalTile {
    synth_scene(size, seed, tile_id).tile
}

/// A generated dataset: manifest records (paths are the default on-disk
/// layout used by [`write_dataset`](super::write_dataset)) plus the tiles.
#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub manifest: DatasetManifest,
    pub tiles: Vec<MultiModalTile>,
}

impl SynthDataset {
    pub fn split(&self, split: Split) -> Vec<&MultiModalTile> {
        self.manifest
            .records
            .iter()
            .zip(&self.tiles)
            .filter(|(r, _)| r.split == split)
            .map(|(_, t)| t)
            .collect()
    }
}

/// Split assignment: a fifth of the tiles (at least one once there are three
/// or more) go to test, another fifth to validation, the rest to training.
pub fn split_for(index: usize, num_tiles: usize) -> Split {
    let n_test = if num_tiles >= 3 { (num_tiles / 5).max(1) } else { 0 };
    let n_val = num_tiles / 5;
    if index >= num_tiles - n_test {
        Split::Test
    } else if index >= num_tiles - n_test - n_val {
        Split::Val
    } else {
        Split::Train
    }
}

pub fn synth_dataset(num_tiles: usize, size: usize, seed: u64) -> Result<SynthDataset> {
    if size == 0 || size % SPATIAL_MULTIPLE != 0 {
        return Err(validation_err!(
            "synthetic tile size {size} must be a positive multiple of {SPATIAL_MULTIPLE}"
        ));
    }
    let mut tiles = Vec::with_capacity(num_tiles);
    let mut records = Vec::with_capacity(num_tiles);
    for i in 0..num_tiles {
        let id = format!("synth_{i:04}");
        let scene = synth_scene(size, seed, &id);
        records.push(TileRecord::standard(&id, split_for(i, num_tiles), Some(scene.dsm_range_m)));
        tiles.push(scene.tile);
    }
    Ok(SynthDataset {
        manifest: DatasetManifest {
            schema_version: DatasetManifest::SCHEMA_VERSION,
            dataset_id: format!("synth-n{num_tiles}-s{size}-seed{seed}"),
            class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            records,
        },
        tiles,
    })
}
