//! Binary model checkpoints.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic "RSTG" | version u32 | meta_len u64 | meta JSON (UTF-8)
//! | tensor data: raw f32 values in manifest order | fnv1a-64 checksum u64
//! ```
//!
//! The JSON block carries the architecture descriptor, the tensor
//! manifest (name, shape, parameter-or-buffer), and the training
//! metadata. The checksum covers every preceding byte, so truncation or
//! corruption fails loudly before any tensor is used. Writes go through
//! a temp file plus rename.

use crate::error::{Error, Result};
use crate::models::{ArchDescriptor, StegoSystem};
use crate::param::ParamModule;
use crate::scalar::Scalar;
use crate::tensor::Tensor;
use crate::training::TrainingMeta;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::Path;

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"RSTG";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TensorKind {
    Parameter,
    Buffer,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub kind: TensorKind,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub architecture: ArchDescriptor,
    pub tensors: Vec<TensorEntry>,
    pub training: TrainingMeta,
}

/// A parsed checkpoint: metadata plus tensors in manifest order.
#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub meta: CheckpointMeta,
    pub tensors: Vec<Tensor<f32>>,
}

fn fnv1a64(data: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325u64;
    for &b in data {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Snapshot a system (parameters, then batch-norm buffers, in traversal
/// order) into a [`Checkpoint`].
pub fn snapshot<T: Scalar>(system: &StegoSystem<T>, training: TrainingMeta) -> Checkpoint {
    let mut entries = Vec::new();
    let mut tensors: Vec<Tensor<f32>> = Vec::new();
    system.visit_params(&mut |p| {
        entries.push(TensorEntry {
            name: p.name.clone(),
            shape: p.value.shape().to_vec(),
            kind: TensorKind::Parameter,
        });
        tensors.push(p.value.cast::<f32>());
    });
    system.visit_buffers(&mut |name, t| {
        entries.push(TensorEntry {
            name: name.to_string(),
            shape: t.shape().to_vec(),
            kind: TensorKind::Buffer,
        });
        tensors.push(t.cast::<f32>());
    });
    Checkpoint {
        meta: CheckpointMeta {
            architecture: system.describe(training.config.image_size),
            tensors: entries,
            training,
        },
        tensors,
    }
}

impl Checkpoint {
    pub fn to_bytes(&self) -> Vec<u8> {
        let meta_json = serde_json::to_vec(&self.meta).expect("meta serializes");
        let mut out = Vec::with_capacity(
            16 + meta_json.len() + self.tensors.iter().map(|t| t.numel() * 4).sum::<usize>() + 8,
        );
        out.extend_from_slice(&CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(meta_json.len() as u64).to_le_bytes());
        out.extend_from_slice(&meta_json);
        for t in &self.tensors {
            for v in t.data() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let checksum = fnv1a64(&out);
        out.extend_from_slice(&checksum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint> {
        if bytes.len() < 4 + 4 + 8 + 8 {
            return Err(Error::CheckpointIntegrity(format!(
                "file too short ({} bytes)",
                bytes.len()
            )));
        }
        if bytes[..4] != CHECKPOINT_MAGIC {
            return Err(Error::CheckpointIntegrity(
                "bad magic: not a checkpoint file".into(),
            ));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != CHECKPOINT_VERSION {
            return Err(Error::CheckpointVersion {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().unwrap());
        let actual = fnv1a64(body);
        if stored != actual {
            return Err(Error::CheckpointIntegrity(format!(
                "checksum mismatch (stored {stored:#018x}, computed {actual:#018x}); \
                 file is corrupt or truncated"
            )));
        }

        let meta_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let meta_end = 16usize
            .checked_add(meta_len)
            .filter(|&e| e <= body.len())
            .ok_or_else(|| Error::CheckpointIntegrity("metadata length out of range".into()))?;
        let meta: CheckpointMeta = serde_json::from_slice(&bytes[16..meta_end])
            .map_err(|e| Error::CheckpointIntegrity(format!("metadata parse: {e}")))?;

        let mut offset = meta_end;
        let mut tensors = Vec::with_capacity(meta.tensors.len());
        for entry in &meta.tensors {
            let n: usize = entry.shape.iter().product();
            let end = offset + n * 4;
            if end > body.len() {
                return Err(Error::CheckpointIntegrity(format!(
                    "tensor data truncated at {}",
                    entry.name
                )));
            }
            let data: Vec<f32> = bytes[offset..end]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            tensors.push(Tensor::from_vec(&entry.shape, data)?);
            offset = end;
        }
        if offset != body.len() {
            return Err(Error::CheckpointIntegrity(format!(
                "{} trailing bytes after tensor data",
                body.len() - offset
            )));
        }
        Ok(Checkpoint { meta, tensors })
    }

    /// Atomic write: temp file in the target directory, then rename.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("tmp");
        std::fs::write(&tmp, self.to_bytes())?;
        std::fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint> {
        Checkpoint::from_bytes(&std::fs::read(path)?)
    }

    pub fn architecture(&self) -> &ArchDescriptor {
        &self.meta.architecture
    }

    /// Reject a checkpoint whose stored architecture differs from the
    /// expected one (different image size, filters, wiring, ...).
    pub fn ensure_architecture(&self, expected: &ArchDescriptor) -> Result<()> {
        if &self.meta.architecture != expected {
            return Err(Error::CheckpointArch(format!(
                "stored architecture (image_size {}, alpha {}) does not match the \
                 expected one (image_size {}, alpha {})",
                self.meta.architecture.image_size,
                self.meta.architecture.alpha,
                expected.image_size,
                expected.alpha
            )));
        }
        Ok(())
    }

    /// Rebuild a system from the stored tensors. Every parameter and
    /// buffer of the live model must appear in the checkpoint and vice
    /// versa, with matching shapes.
    pub fn instantiate<T: Scalar>(&self) -> Result<StegoSystem<T>> {
        let arch = &self.meta.architecture;
        let mut system = StegoSystem::<T>::new(arch.alpha, 0)?;
        if system.describe(arch.image_size) != *arch {
            return Err(Error::CheckpointArch(
                "stored architecture descriptor does not match this build's model wiring".into(),
            ));
        }

        let mut by_name: HashMap<&str, (&TensorEntry, &Tensor<f32>)> = HashMap::new();
        for (entry, tensor) in self.meta.tensors.iter().zip(&self.tensors) {
            if by_name.insert(entry.name.as_str(), (entry, tensor)).is_some() {
                return Err(Error::CheckpointArch(format!(
                    "duplicate tensor {} in checkpoint",
                    entry.name
                )));
            }
        }

        let mut failure: Option<Error> = None;
        system.visit_params_mut(&mut |p| {
            if failure.is_some() {
                return;
            }
            match by_name.remove(p.name.as_str()) {
                Some((entry, tensor)) if entry.shape == p.value.shape() => {
                    p.value = tensor.cast::<T>();
                }
                Some((entry, _)) => {
                    failure = Some(Error::CheckpointArch(format!(
                        "parameter {} has shape {:?} in checkpoint, model expects {:?}",
                        p.name,
                        entry.shape,
                        p.value.shape()
                    )));
                }
                None => {
                    failure = Some(Error::CheckpointArch(format!(
                        "parameter {} missing from checkpoint",
                        p.name
                    )));
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        let mut failure: Option<Error> = None;
        system.visit_buffers_mut(&mut |name, buf| {
            if failure.is_some() {
                return;
            }
            match by_name.remove(name) {
                Some((entry, tensor)) if entry.shape == buf.shape() => {
                    *buf = tensor.cast::<T>();
                }
                Some((entry, _)) => {
                    failure = Some(Error::CheckpointArch(format!(
                        "buffer {name} has shape {:?} in checkpoint, model expects {:?}",
                        entry.shape,
                        buf.shape()
                    )));
                }
                None => {
                    failure = Some(Error::CheckpointArch(format!(
                        "buffer {name} missing from checkpoint"
                    )));
                }
            }
        });
        if let Some(e) = failure {
            return Err(e);
        }
        if let Some(name) = by_name.keys().next() {
            return Err(Error::CheckpointArch(format!(
                "checkpoint tensor {name} has no matching parameter or buffer"
            )));
        }
        Ok(system)
    }
}
