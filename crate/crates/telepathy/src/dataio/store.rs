//! On-disk tensor container.
//!
//! A blob file holds one tensor: the 8-byte magic `TELE0001`, a `u8` dtype
//! code, a `u32` rank, `rank` little-endian `u64` dims, then the raw
//! little-endian data. Checkpoints and datasets are directories with a
//! human-readable `manifest.json` next to a `blobs/` directory of `.ten`
//! files; round-trips are bit-exact.

use crate::autodiff::Data;
use ndarray::{ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const MAGIC: &[u8; 8] = b"TELE0001";
pub const CONTAINER_VERSION: u32 = 1;

const DTYPE_F64: u8 = 1;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: bad magic (not a tensor blob)")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported dtype code {code}")]
    BadDtype { path: PathBuf, code: u8 },
    #[error("{path}: truncated or oversized blob (expected {expected} bytes, found {found})")]
    Truncated { path: PathBuf, expected: usize, found: usize },
    #[error("{path}: container version {found}, expected {expected}")]
    VersionMismatch { path: PathBuf, found: u32, expected: u32 },
    #[error("missing blob for `{id}`: {path}")]
    MissingBlob { id: String, path: PathBuf },
    #[error("{path}: {message}")]
    BadManifest { path: PathBuf, message: String },
    #[error("checkpoint tensor `{name}` missing")]
    MissingTensor { name: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io { path: path.to_path_buf(), source }
}

/// Writes one `f64` tensor blob.
pub fn write_tensor(path: &Path, tensor: &Data) -> Result<(), StoreError> {
    let mut buf = Vec::with_capacity(21 + tensor.len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.push(DTYPE_F64);
    let dims = tensor.shape();
    buf.extend_from_slice(&(dims.len() as u32).to_le_bytes());
    for &d in dims {
        buf.extend_from_slice(&(d as u64).to_le_bytes());
    }
    let standard = tensor.as_standard_layout();
    for v in standard.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    let mut f = fs::File::create(path).map_err(io_err(path))?;
    f.write_all(&buf).map_err(io_err(path))
}

/// Reads one tensor blob, validating magic, dtype, and exact length.
pub fn read_tensor(path: &Path) -> Result<Data, StoreError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .map_err(io_err(path))?
        .read_to_end(&mut bytes)
        .map_err(io_err(path))?;
    if bytes.len() < 13 || &bytes[..8] != MAGIC {
        return Err(StoreError::BadMagic { path: path.to_path_buf() });
    }
    let dtype = bytes[8];
    if dtype != DTYPE_F64 {
        return Err(StoreError::BadDtype { path: path.to_path_buf(), code: dtype });
    }
    let rank = u32::from_le_bytes(bytes[9..13].try_into().unwrap()) as usize;
    let header = 13 + 8 * rank;
    if bytes.len() < header {
        return Err(StoreError::Truncated { path: path.to_path_buf(), expected: header, found: bytes.len() });
    }
    let mut dims = Vec::with_capacity(rank);
    for k in 0..rank {
        let off = 13 + 8 * k;
        dims.push(u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize);
    }
    let numel: usize = dims.iter().product();
    let expected = header + numel * 8;
    if bytes.len() != expected {
        return Err(StoreError::Truncated { path: path.to_path_buf(), expected, found: bytes.len() });
    }
    let mut data = Vec::with_capacity(numel);
    for k in 0..numel {
        let off = header + 8 * k;
        data.push(f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()));
    }
    Ok(ArrayD::from_shape_vec(IxDyn(&dims), data).unwrap())
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointManifest {
    version: u32,
    header: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    file: String,
}

/// Saves named tensors plus a JSON header under `dir`.
pub fn save_checkpoint(
    dir: &Path,
    header: &serde_json::Value,
    tensors: &[(String, Data)],
) -> Result<(), StoreError> {
    let blobs = dir.join("blobs");
    fs::create_dir_all(&blobs).map_err(io_err(&blobs))?;
    let mut entries = Vec::with_capacity(tensors.len());
    for (i, (name, t)) in tensors.iter().enumerate() {
        let file = format!("t{i:05}.ten");
        write_tensor(&blobs.join(&file), t)?;
        entries.push(TensorEntry { name: name.clone(), file });
    }
    let manifest = CheckpointManifest {
        version: CONTAINER_VERSION,
        header: header.clone(),
        tensors: entries,
    };
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(io_err(&path))
}

/// Loads a checkpoint directory: header plus name-keyed tensors.
pub fn load_checkpoint(dir: &Path) -> Result<(serde_json::Value, HashMap<String, Data>), StoreError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: CheckpointManifest = serde_json::from_str(&text)
        .map_err(|e| StoreError::BadManifest { path: path.clone(), message: e.to_string() })?;
    if manifest.version != CONTAINER_VERSION {
        return Err(StoreError::VersionMismatch {
            path,
            found: manifest.version,
            expected: CONTAINER_VERSION,
        });
    }
    let mut tensors = HashMap::new();
    for e in &manifest.tensors {
        let blob = dir.join("blobs").join(&e.file);
        if !blob.exists() {
            return Err(StoreError::MissingBlob { id: e.name.clone(), path: blob });
        }
        tensors.insert(e.name.clone(), read_tensor(&blob)?);
    }
    Ok((manifest.header, tensors))
}
