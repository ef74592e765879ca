//! Tiles, manifests, tiling, augmentation and synthetic scenes.

mod augment;
mod manifest;
pub mod raster_io;
mod synth;
mod tile;
mod tiling;

pub use augment::augment_rotate;
pub use manifest::{
    write_dataset, write_manifest, write_tile, Dataset, DatasetManifest, Split, TileRecord,
};
pub use synth::{
    split_for, synth_dataset, synth_scene, synth_tile, SynthDataset, SynthTile, CLASS_HEIGHT_M,
    CLASS_MEANS, SPECTRAL_NOISE,
};
pub use tile::{stack_batch, MultiModalTile, CLASS_NAMES, CLUTTER, NUM_CLASSES};
pub use tiling::{extract, tile_raster, window_starts, windows, Window};
