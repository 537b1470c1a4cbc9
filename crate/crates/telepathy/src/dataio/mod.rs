//! Synthetic EEG-image corpus generation, EEG preprocessing/tokenization,
//! and the on-disk dataset container.
//!
//! # Dataset directory layout
//!
//! ```text
//! <dir>/
//!   manifest.json        # header: seed, class names, entries with splits
//!   blobs/
//!     eeg_pair_0000.ten  # [channels, timesteps] f64
//!     img_pair_0000.ten  # [H, W, 3] f64 in [0, 1]
//!     ...
//! ```
//!
//! Blobs use the container from [`store`]; round-trips restore arrays
//! bit-exactly.

pub mod preprocess;
pub mod store;
pub mod synth;

pub use preprocess::{bandpass, detokenize, preprocess_eeg, tokenize, PreprocessConfig, PreprocessError};
pub use store::{load_checkpoint, read_tensor, save_checkpoint, write_tensor, StoreError};
pub use synth::{synth_corpus, SynthError, SynthSpec};

use crate::autodiff::Data;
use crate::nerf::CameraPose;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

/// Raw multichannel EEG signal paired with an image.
#[derive(Debug, Clone)]
pub struct EEGRecording {
    /// `[channels, timesteps]`, arbitrary units.
    pub samples: Data,
    pub sample_rate: f64,
    pub label: usize,
    pub pair_id: String,
}

impl EEGRecording {
    pub fn new(samples: Data, sample_rate: f64, label: usize, pair_id: String) -> Result<Self, String> {
        if samples.ndim() != 2 {
            return Err(format!("samples must be [channels, timesteps], got {:?}", samples.shape()));
        }
        let (ch, t) = (samples.shape()[0], samples.shape()[1]);
        if ch < 1 {
            return Err("at least one channel required".into());
        }
        if t < 4 {
            return Err(format!("at least 4 timesteps required, got {t}"));
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(format!("non-finite sample in recording {pair_id}"));
        }
        Ok(EEGRecording { samples, sample_rate, label, pair_id })
    }

    pub fn channels(&self) -> usize {
        self.samples.shape()[0]
    }

    pub fn timesteps(&self) -> usize {
        self.samples.shape()[1]
    }
}

/// Tokenized, channel-padded form of a recording.
///
/// Tokens concatenate `group_size` consecutive timesteps across all channels
/// (channel-major), so `token_dim = channel_count * group_size` and the
/// mapping is an exact reshape of the padded signal.
#[derive(Debug, Clone)]
pub struct EEGTokenSequence {
    /// `[n_tokens, token_dim]`.
    pub tokens: Data,
    pub n_tokens: usize,
    pub channel_count: usize,
    pub group_size: usize,
    /// Timesteps that came from the recording (the rest are zero padding).
    pub valid_timesteps: usize,
}

impl EEGTokenSequence {
    pub fn token_dim(&self) -> usize {
        self.channel_count * self.group_size
    }
}

/// A square RGB image with its class and canonical camera pose.
#[derive(Debug, Clone)]
pub struct ImageSample {
    /// `[H, W, 3]`, clamped to `[0, 1]`.
    pub pixels: Data,
    pub label: usize,
    pub pose: CameraPose,
}

impl ImageSample {
    pub fn new(pixels: Data, label: usize, pose: CameraPose) -> Result<Self, String> {
        if pixels.ndim() != 3 || pixels.shape()[2] != 3 {
            return Err(format!("pixels must be [H, W, 3], got {:?}", pixels.shape()));
        }
        if pixels.shape()[0] != pixels.shape()[1] {
            return Err(format!(
                "image must be square, got {}x{}",
                pixels.shape()[0],
                pixels.shape()[1]
            ));
        }
        let pixels = pixels.mapv(|v| v.clamp(0.0, 1.0));
        Ok(ImageSample { pixels, label, pose })
    }

    pub fn size(&self) -> usize {
        self.pixels.shape()[0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub pair_id: String,
    pub label: usize,
    pub split: Split,
    pub eeg_blob: String,
    pub image_blob: String,
    pub pose: CameraPose,
    pub sample_rate: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub version: u32,
    pub seed: u64,
    pub class_names: Vec<String>,
    pub entries: Vec<ManifestEntry>,
}

impl DatasetManifest {
    /// Checks structural invariants: unique pair ids (so splits are disjoint)
    /// and labels within range.
    pub fn validate(&self) -> Result<(), String> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.pair_id.as_str()) {
                return Err(format!("duplicate pair_id {}", e.pair_id));
            }
            if e.label >= self.class_names.len() {
                return Err(format!("label {} out of range for {}", e.label, e.pair_id));
            }
        }
        Ok(())
    }
}

/// In-memory dataset: manifest plus aligned recordings and images.
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub eeg: Vec<EEGRecording>,
    pub images: Vec<ImageSample>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn n_classes(&self) -> usize {
        self.manifest.class_names.len()
    }

    /// Indices belonging to a split, in manifest order.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.manifest
            .entries
            .iter()
            .enumerate()
            .filter(|(_, e)| e.split == split)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.manifest.entries.iter().map(|e| e.label).collect()
    }
}

/// Writes the dataset as `manifest.json` plus per-tensor blobs.
pub fn save_dataset(dataset: &Dataset, dir: &Path) -> Result<(), StoreError> {
    let blobs = dir.join("blobs");
    fs::create_dir_all(&blobs).map_err(|source| StoreError::Io { path: blobs.clone(), source })?;
    for (entry, (rec, img)) in dataset
        .manifest
        .entries
        .iter()
        .zip(dataset.eeg.iter().zip(dataset.images.iter()))
    {
        write_tensor(&blobs.join(&entry.eeg_blob), &rec.samples)?;
        write_tensor(&blobs.join(&entry.image_blob), &img.pixels)?;
    }
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&dataset.manifest).expect("manifest serializes");
    fs::write(&path, text).map_err(|source| StoreError::Io { path, source })
}

/// Loads a dataset directory, restoring arrays bit-exactly. A missing blob is
/// reported with the pair id it belongs to.
pub fn load_dataset(dir: &Path) -> Result<Dataset, StoreError> {
    let path = dir.join("manifest.json");
    let text = fs::read_to_string(&path).map_err(|source| StoreError::Io { path: path.clone(), source })?;
    let manifest: DatasetManifest = serde_json::from_str(&text)
        .map_err(|e| StoreError::BadManifest { path: path.clone(), message: e.to_string() })?;
    if manifest.version != store::CONTAINER_VERSION {
        return Err(StoreError::VersionMismatch {
            path,
            found: manifest.version,
            expected: store::CONTAINER_VERSION,
        });
    }
    manifest
        .validate()
        .map_err(|message| StoreError::BadManifest { path: path.clone(), message })?;

    let mut eeg = Vec::with_capacity(manifest.entries.len());
    let mut images = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        let eeg_path = dir.join("blobs").join(&e.eeg_blob);
        if !eeg_path.exists() {
            return Err(StoreError::MissingBlob { id: e.pair_id.clone(), path: eeg_path });
        }
        let img_path = dir.join("blobs").join(&e.image_blob);
        if !img_path.exists() {
            return Err(StoreError::MissingBlob { id: e.pair_id.clone(), path: img_path });
        }
        let samples = read_tensor(&eeg_path)?;
        let pixels = read_tensor(&img_path)?;
        eeg.push(
            EEGRecording::new(samples, e.sample_rate, e.label, e.pair_id.clone())
                .map_err(|m| StoreError::BadManifest { path: eeg_path, message: m })?,
        );
        images.push(
            ImageSample::new(pixels, e.label, e.pose)
                .map_err(|m| StoreError::BadManifest { path: img_path, message: m })?,
        );
    }
    Ok(Dataset { manifest, eeg, images })
}
