use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::raster_io::{read_dsm, read_labels, read_spectral, write_dsm, write_labels, write_spectral};
use super::tile::{MultiModalTile, CLASS_NAMES};
use crate::error::{validation_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// One tile on disk. Paths are relative to the manifest's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TileRecord {
    pub tile_id: String,
    pub spectral_path: PathBuf,
    pub dsm_path: PathBuf,
    pub label_path: PathBuf,
    pub split: Split,
    /// Raw DSM (min, max) in meters before per-tile normalization.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dsm_range_m: Option<(f32, f32)>,
}

impl TileRecord {
    /// Record with the default file layout `<kind>/<tile_id>.png`.
    pub fn standard(tile_id: &str, split: Split, dsm_range_m: Option<(f32, f32)>) -> Self {
        let file = format!("{}.png", sanitize(tile_id));
        TileRecord {
            tile_id: tile_id.to_string(),
            spectral_path: Path::new("spectral").join(&file),
            dsm_path: Path::new("dsm").join(&file),
            label_path: Path::new("labels").join(&file),
            split,
            dsm_range_m,
        }
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub schema_version: u32,
    pub dataset_id: String,
    pub class_names: Vec<String>,
    pub records: Vec<TileRecord>,
}

impl DatasetManifest {
    pub const SCHEMA_VERSION: u32 = 1;
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != Self::SCHEMA_VERSION {
            return Err(validation_err!(
                "unsupported manifest schema {} (expected {})",
                self.schema_version,
                Self::SCHEMA_VERSION
            ));
        }
        if self.class_names.len() != CLASS_NAMES.len() {
            return Err(validation_err!(
                "manifest lists {} classes, expected {}",
                self.class_names.len(),
                CLASS_NAMES.len()
            ));
        }
        let mut seen = HashSet::new();
        for r in &self.records {
            if !seen.insert(r.tile_id.as_str()) {
                return Err(validation_err!(
                    "tile {} appears more than once; splits must be disjoint",
                    r.tile_id
                ));
            }
        }
        Ok(())
    }

    pub fn records_in(&self, split: Split) -> impl Iterator<Item = &TileRecord> {
        self.records.iter().filter(move |r| r.split == split)
    }

    pub fn has_split(&self, split: Split) -> bool {
        self.records_in(split).next().is_some()
    }
}

/// A manifest together with the directory its relative paths resolve against.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub root: PathBuf,
}

impl Dataset {
    /// Reads and validates a manifest, checking that every referenced file exists.
    pub fn open(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: DatasetManifest = serde_json::from_str(&text)?;
        manifest.validate()?;
        let root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        for r in &manifest.records {
            for p in [&r.spectral_path, &r.dsm_path, &r.label_path] {
                let full = root.join(p);
                if !full.exists() {
                    return Err(validation_err!(
                        "tile {}: missing file {}",
                        r.tile_id,
                        full.display()
                    ));
                }
            }
        }
        Ok(Dataset { manifest, root })
    }

    pub fn load_tile(&self, record: &TileRecord) -> Result<MultiModalTile> {
        MultiModalTile::new(
            record.tile_id.clone(),
            read_spectral(&self.root.join(&record.spectral_path))?,
            read_dsm(&self.root.join(&record.dsm_path))?,
            read_labels(&self.root.join(&record.label_path))?,
        )
    }

    pub fn load_split(&self, split: Split) -> Result<Vec<MultiModalTile>> {
        self.manifest
            .records_in(split)
            .map(|r| self.load_tile(r))
            .collect()
    }
}

/// Writes rasters for every tile and the manifest into `dir`. Returns the manifest path.
pub fn write_dataset(dir: &Path, manifest: &DatasetManifest, tiles: &[MultiModalTile]) -> Result<PathBuf> {
    manifest.validate()?;
    if manifest.records.len() != tiles.len() {
        return Err(validation_err!(
            "{} records but {} tiles",
            manifest.records.len(),
            tiles.len()
        ));
    }
    for (r, t) in manifest.records.iter().zip(tiles) {
        write_tile(dir, r, t)?;
    }
    write_manifest(dir, manifest)
}

pub fn write_tile(dir: &Path, record: &TileRecord, tile: &MultiModalTile) -> Result<()> {
    write_spectral(&dir.join(&record.spectral_path), &tile.spectral)?;
    write_dsm(&dir.join(&record.dsm_path), &tile.dsm)?;
    write_labels(&dir.join(&record.label_path), &tile.labels)
}

pub fn write_manifest(dir: &Path, manifest: &DatasetManifest) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join(DatasetManifest::FILE_NAME);
    let json = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_tiles_are_rejected() {
        let rec = TileRecord::standard("a", Split::Train, None);
        let mut rec2 = rec.clone();
        rec2.split = Split::Test;
        let m = DatasetManifest {
            schema_version: 1,
            dataset_id: "x".into(),
            class_names: CLASS_NAMES.iter().map(|s| s.to_string()).collect(),
            records: vec![rec, rec2],
        };
        assert!(m.validate().is_err());
    }

    #[test]
    fn ids_are_sanitized_into_paths() {
        let r = TileRecord::standard("top/7#1,2", Split::Val, None);
        assert_eq!(r.spectral_path, Path::new("spectral").join("top_7_1_2.png"));
    }
}
