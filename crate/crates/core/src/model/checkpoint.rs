//! Checkpoint archive.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic        8 bytes   "RDNCKPT\0"
//! header_len   u64
//! header       header_len bytes of UTF-8 JSON (CheckpointHeader)
//! payload      raw f32 values, concatenated in manifest order
//! ```
//!
//! Each manifest entry records its byte offset relative to the start of the payload.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};

use crate::autograd::Real;
use crate::error::{Error, Result};

use super::config::ModelConfig;
use super::net::RobustDenseNet;
use super::params::ParamStore;

pub const MAGIC: &[u8; 8] = b"RDNCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub dtype: String,
    pub offset: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub config: ModelConfig,
    pub params: Vec<ManifestEntry>,
    /// Free-form run metadata (training step, seed, ...).
    #[serde(default)]
    pub metadata: serde_json::Map<String, serde_json::Value>,
}

pub fn to_bytes<T: Real>(
    model: &RobustDenseNet<T>,
    metadata: serde_json::Map<String, serde_json::Value>,
) -> Result<Vec<u8>> {
    let mut entries = Vec::with_capacity(model.params().len());
    let mut payload = Vec::with_capacity(model.params().num_scalars() * 4);
    for (name, value) in model.params().iter() {
        entries.push(ManifestEntry {
            name: name.to_string(),
            shape: value.shape().to_vec(),
            dtype: "f32".into(),
            offset: payload.len() as u64,
        });
        for &v in value.iter() {
            payload.extend_from_slice(&(v.to_f64() as f32).to_le_bytes());
        }
    }
    let header = CheckpointHeader {
        format_version: FORMAT_VERSION,
        config: model.config().clone(),
        params: entries,
        metadata,
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&payload);
    Ok(out)
}

pub fn from_bytes<T: Real>(bytes: &[u8]) -> Result<(RobustDenseNet<T>, CheckpointHeader)> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(bad("missing checkpoint magic"));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(&bytes[16..header_end])?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "unsupported format version {} (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    let payload = &bytes[header_end..];
    let mut store = ParamStore::new();
    for e in &header.params {
        if e.dtype != "f32" {
            return Err(Error::Checkpoint(format!("{}: unsupported dtype {}", e.name, e.dtype)));
        }
        let n: usize = e.shape.iter().product();
        let start = e.offset as usize;
        let end = start + 4 * n;
        let raw = payload
            .get(start..end)
            .ok_or_else(|| Error::Checkpoint(format!("{}: payload out of range", e.name)))?;
        let data: Vec<T> = raw
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        store.insert(
            e.name.clone(),
            ArrayD::from_shape_vec(IxDyn(&e.shape), data).unwrap(),
        )?;
    }
    let model = RobustDenseNet::from_params(header.config.clone(), store)?;
    Ok((model, header))
}

pub fn save<T: Real>(
    model: &RobustDenseNet<T>,
    path: &Path,
    metadata: serde_json::Map<String, serde_json::Value>,
) -> Result<()> {
    let bytes = to_bytes(model, metadata)?;
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&bytes).map_err(|e| Error::io(path, e))
}

pub fn load<T: Real>(path: &Path) -> Result<(RobustDenseNet<T>, CheckpointHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
