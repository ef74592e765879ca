//! Generates a synthetic dataset on disk, reloads it and cuts a large tile
//! into edge-aligned patches.
//!
//! `cargo run --release --example synth_and_tile -- [out_dir]`

use std::path::PathBuf;

use robustdense::data::{synth_dataset, synth_tile, tile_raster, window_starts, write_dataset, Dataset, Split};

fn main() -> robustdense::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "synth_out".into()));
    let data = synth_dataset(8, 128, 1)?;
    let manifest = write_dataset(&out, &data.manifest, &data.tiles)?;
    let ds = Dataset::open(&manifest)?;
    for split in [Split::Train, Split::Val, Split::Test] {
        println!("{split:?}: {} tiles", ds.manifest.records_in(split).count());
    }
    let reloaded = ds.load_split(Split::Test)?;
    println!("reloaded {} test tiles of {}x{}", reloaded.len(), reloaded[0].height(), reloaded[0].width());

    println!("6000 px at 1280: starts {:?}", window_starts(6000, 1280, 1280));
    let big = synth_tile(600, 2, "big");
    let patches = tile_raster(&big, 128, 128)?;
    println!("600 px at 128: {} patches, e.g. {}", patches.len(), patches[24].tile_id);
    Ok(())
}
