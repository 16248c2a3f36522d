//! Checkpoints: a JSON manifest (config, named tensor table, seed, training
//! metadata) next to a little-endian f32 blob. Round-trips are bit-exact.

use super::model::ResNetModel;
use super::tensor::Tensor;
use super::NnError;
use crate::chart::NormStats;
use serde::{Deserialize, Serialize};
use std::io::{Read, Write};
use std::path::Path;

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Offset into the blob, in f32 elements.
    pub offset: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, Default)]
pub struct TrainMeta {
    pub best_epoch: usize,
    pub best_val_loss: f64,
    pub val_accuracy: f64,
    pub epochs_run: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format_version: u32,
    pub config: super::model::ResNetConfig,
    pub seed: u64,
    pub norm: Option<NormStats>,
    pub noise_sigma: Option<[f64; 3]>,
    pub tensors: Vec<TensorEntry>,
    pub train_meta: TrainMeta,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

fn running_names(i: usize) -> (String, String) {
    (format!("bn_state{i:02}.mean"), format!("bn_state{i:02}.var"))
}

/// Serialize the model to `(manifest JSON, f32 blob)` byte buffers.
pub fn encode(
    model: &ResNetModel<f32>,
    noise_sigma: Option<[f64; 3]>,
    train_meta: &TrainMeta,
    config_hash: Option<&str>,
) -> Result<(Vec<u8>, Vec<u8>), NnError> {
    let mut tensors = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    let mut offset = 0usize;
    let mut push = |name: &str, shape: Vec<usize>, data: &[f32], blob: &mut Vec<u8>| {
        tensors.push(TensorEntry { name: name.into(), shape, offset, len: data.len() });
        for v in data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        offset += data.len();
    };
    for (name, t) in &model.params {
        push(name, t.shape().to_vec(), t.data(), &mut blob);
    }
    for (i, r) in model.bn_running.iter().enumerate() {
        let (mname, vname) = running_names(i);
        push(&mname, vec![r.mean.len()], &r.mean, &mut blob);
        push(&vname, vec![r.var.len()], &r.var, &mut blob);
    }
    let manifest = CheckpointManifest {
        format_version: CHECKPOINT_FORMAT,
        config: model.config.clone(),
        seed: model.seed,
        norm: model.norm.clone(),
        noise_sigma,
        tensors,
        train_meta: train_meta.clone(),
        config_hash: config_hash.map(|s| s.to_string()),
    };
    let json = serde_json::to_vec_pretty(&manifest)
        .map_err(|e| NnError::Checkpoint(e.to_string()))?;
    Ok((json, blob))
}

/// Rebuild a model from manifest and blob bytes, validating the tensor
/// table against the layer plan of the stored config.
pub fn decode(json: &[u8], blob: &[u8]) -> Result<(ResNetModel<f32>, CheckpointManifest), NnError> {
    let manifest: CheckpointManifest =
        serde_json::from_slice(json).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    if manifest.format_version != CHECKPOINT_FORMAT {
        return Err(NnError::Checkpoint(format!(
            "unsupported format version {}",
            manifest.format_version
        )));
    }
    if blob.len() % 4 != 0 {
        return Err(NnError::Checkpoint("blob length not a multiple of 4".into()));
    }
    let floats: Vec<f32> = blob
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let take = |entry: &TensorEntry| -> Result<Vec<f32>, NnError> {
        let end = entry
            .offset
            .checked_add(entry.len)
            .ok_or_else(|| NnError::Checkpoint("tensor range overflows".into()))?;
        if end > floats.len() {
            return Err(NnError::Checkpoint(format!(
                "tensor {} [{}..{}] exceeds blob of {} floats",
                entry.name,
                entry.offset,
                end,
                floats.len()
            )));
        }
        if entry.shape.iter().product::<usize>() != entry.len {
            return Err(NnError::Checkpoint(format!(
                "tensor {}: shape {:?} does not match len {}",
                entry.name, entry.shape, entry.len
            )));
        }
        Ok(floats[entry.offset..end].to_vec())
    };

    let mut model = ResNetModel::<f32>::init(manifest.config.clone(), manifest.seed)?;
    // overwrite initialized tensors with stored ones, by name
    for (name, tensor) in model.params.iter_mut() {
        let entry = manifest
            .tensors
            .iter()
            .find(|e| &e.name == name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing tensor {name}")))?;
        if entry.shape != tensor.shape() {
            return Err(NnError::Checkpoint(format!(
                "tensor {name}: stored shape {:?} vs plan shape {:?}",
                entry.shape,
                tensor.shape()
            )));
        }
        *tensor = Tensor::from_vec(&entry.shape, take(entry)?);
    }
    for (i, running) in model.bn_running.iter_mut().enumerate() {
        let (mname, vname) = running_names(i);
        for (name, slot) in [(mname, &mut running.mean), (vname, &mut running.var)] {
            let entry = manifest
                .tensors
                .iter()
                .find(|e| e.name == name)
                .ok_or_else(|| NnError::Checkpoint(format!("missing tensor {name}")))?;
            *slot = take(entry)?;
        }
    }
    model.norm = manifest.norm.clone();
    model.seed = manifest.seed;
    Ok((model, manifest))
}

pub fn save(
    model: &ResNetModel<f32>,
    noise_sigma: Option<[f64; 3]>,
    train_meta: &TrainMeta,
    config_hash: Option<&str>,
    json_path: &Path,
    bin_path: &Path,
) -> Result<(), NnError> {
    let (json, blob) = encode(model, noise_sigma, train_meta, config_hash)?;
    std::fs::File::create(json_path)?.write_all(&json)?;
    std::fs::File::create(bin_path)?.write_all(&blob)?;
    Ok(())
}

pub fn load(json_path: &Path, bin_path: &Path) -> Result<(ResNetModel<f32>, CheckpointManifest), NnError> {
    let mut json = Vec::new();
    std::fs::File::open(json_path)?.read_to_end(&mut json)?;
    let mut blob = Vec::new();
    std::fs::File::open(bin_path)?.read_to_end(&mut blob)?;
    decode(&json, &blob)
}
