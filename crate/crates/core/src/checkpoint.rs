//! Checkpoint files.
//!
//! Layout:
//!
//! ```text
//! HAUCLCKPT1\n
//! {"params":[{"name":..,"shape":[..],"byte_offset":..},..],"blob_len":..}\n
//! <blob>
//! ```
//!
//! The blob holds every parameter as little-endian IEEE-754 `f64`s in
//! row-major order, concatenated in manifest order. `byte_offset` is
//! relative to the start of the blob. Loading resolves parameters by name,
//! so manifest entries may appear in any order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8] = b"HAUCLCKPT1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub byte_offset: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub params: Vec<ManifestEntry>,
    pub blob_len: u64,
}

pub fn encode(params: &ParamStore) -> Vec<u8> {
    let mut blob = Vec::with_capacity(params.num_scalars() * 8);
    let mut entries = Vec::with_capacity(params.len());
    for (name, value) in params.iter() {
        entries.push(ManifestEntry {
            name: name.to_string(),
            shape: value.shape().to_vec(),
            byte_offset: blob.len() as u64,
        });
        for v in value.data() {
            blob.extend_from_slice(&v.to_le_bytes());
        }
    }
    let manifest = Manifest { params: entries, blob_len: blob.len() as u64 };
    let mut out = Vec::with_capacity(MAGIC.len() + blob.len() + 256);
    out.extend_from_slice(MAGIC);
    out.push(b'\n');
    out.extend_from_slice(serde_json::to_string(&manifest).expect("manifest serializes").as_bytes());
    out.push(b'\n');
    out.extend_from_slice(&blob);
    out
}

pub fn decode(bytes: &[u8]) -> Result<ParamStore> {
    let header_end =
        bytes.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Version("missing header line".into()))?;
    if &bytes[..header_end] != MAGIC {
        return Err(Error::Version(format!(
            "unknown magic {:?}",
            String::from_utf8_lossy(&bytes[..header_end.min(32)])
        )));
    }
    let rest = &bytes[header_end + 1..];
    let manifest_end =
        rest.iter().position(|&b| b == b'\n').ok_or_else(|| Error::Corrupt("unterminated manifest".into()))?;
    let manifest: Manifest =
        serde_json::from_slice(&rest[..manifest_end]).map_err(|e| Error::Corrupt(format!("manifest: {e}")))?;
    let blob = &rest[manifest_end + 1..];
    if blob.len() as u64 != manifest.blob_len {
        return Err(Error::Corrupt(format!(
            "blob holds {} bytes, manifest declares {}",
            blob.len(),
            manifest.blob_len
        )));
    }

    let mut store = ParamStore::new();
    for entry in &manifest.params {
        let numel: usize = entry.shape.iter().product();
        let start = usize::try_from(entry.byte_offset)
            .map_err(|_| Error::Corrupt(format!("{}: offset overflow", entry.name)))?;
        let end = start + numel * 8;
        if end > blob.len() {
            return Err(Error::Corrupt(format!("{}: bytes {start}..{end} exceed blob of {}", entry.name, blob.len())));
        }
        let data =
            blob[start..end].chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk"))).collect();
        let tensor =
            Tensor::new(entry.shape.clone(), data).map_err(|e| Error::Corrupt(format!("{}: {e}", entry.name)))?;
        if store.id(&entry.name).is_some() {
            return Err(Error::Corrupt(format!("duplicate parameter {}", entry.name)));
        }
        store.add(entry.name.clone(), tensor);
    }
    Ok(store)
}

pub fn save_checkpoint(params: &ParamStore, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode(params)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParamStore> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
