//! Damages a synthetic tile at several fractions and writes the spectral
//! rasters (first three bands as RGB-ish preview) next to the region lists.
//!
//! `cargo run --release --example corrupt_tile -- [out_dir]`

use std::path::PathBuf;

use robustdense::corruption::{corrupt_with_mask, CorruptionSpec, DamageKind};
use robustdense::data::{raster_io, synth_tile};

fn main() -> robustdense::Result<()> {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "corrupt_out".into()));
    let tile = synth_tile(256, 5, "demo");
    raster_io::write_spectral(&out.join("clean.png"), &tile.spectral)?;
    for fraction in [0.1, 0.2, 0.5] {
        let spec = CorruptionSpec::new(fraction, 42);
        let (damaged, mask) = corrupt_with_mask(&tile, &spec)?;
        let blurred = mask.regions.iter().filter(|r| r.kind == DamageKind::Blur).count();
        println!(
            "requested {fraction:.2}  achieved {:.4}  regions {} ({blurred} blurred)",
            mask.fraction(),
            mask.regions.len()
        );
        assert_eq!(damaged.dsm, tile.dsm);
        raster_io::write_spectral(&out.join(format!("damaged_{:02}.png", (fraction * 100.0) as u32)), &damaged.spectral)?;
    }
    println!("wrote rasters to {}", out.display());
    Ok(())
}
