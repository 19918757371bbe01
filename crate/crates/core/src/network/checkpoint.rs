//! Checkpoints: a JSON manifest naming every tensor with its shape and
//! byte range inside one little-endian payload file next to it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::cascade::Donet;
use crate::network::config::CascadeConfig;
use crate::scalar::Scalar;
use crate::tensor::RealTensor;

pub const CHECKPOINT_FORMAT: &str = "donet-checkpoint";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorRecord {
    pub name: String,
    pub shape: [usize; 4],
    pub offset: u64,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointManifest {
    pub format: String,
    pub version: u32,
    pub dtype: String,
    pub config: CascadeConfig,
    /// Payload file name, relative to the manifest.
    pub payload: String,
    pub tensors: Vec<TensorRecord>,
    /// Free-form metadata such as the optimizer step.
    #[serde(default)]
    pub extra: serde_json::Value,
}

/// `run/best.json` → `run/best.bin`.
pub fn payload_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("bin")
}

pub fn write_checkpoint<T: Scalar>(
    path: &Path,
    config: &CascadeConfig,
    tensors: &[(String, &RealTensor<T>)],
    extra: serde_json::Value,
) -> Result<CheckpointManifest> {
    let payload = payload_path(path);
    let mut bytes = Vec::new();
    let mut records = Vec::with_capacity(tensors.len());
    for (name, t) in tensors {
        let offset = bytes.len() as u64;
        for &v in t.data() {
            v.write_le(&mut bytes);
        }
        records.push(TensorRecord {
            name: name.clone(),
            shape: t.shape(),
            offset,
            bytes: bytes.len() as u64 - offset,
        });
    }
    let manifest = CheckpointManifest {
        format: CHECKPOINT_FORMAT.into(),
        version: 1,
        dtype: T::DTYPE.into(),
        config: *config,
        payload: payload
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .ok_or_else(|| Error::Config(format!("bad checkpoint path {}", path.display())))?,
        tensors: records,
        extra,
    };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    // payload first so a manifest never points at a missing file
    fs::write(&payload, bytes)?;
    fs::write(path, serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(manifest)
}

pub fn read_checkpoint<T: Scalar>(path: &Path) -> Result<(CheckpointManifest, Vec<(String, RealTensor<T>)>)> {
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(path)?)?;
    if manifest.format != CHECKPOINT_FORMAT || manifest.version != 1 {
        return Err(Error::Format(format!(
            "unsupported checkpoint {} v{}",
            manifest.format, manifest.version
        )));
    }
    if manifest.dtype != T::DTYPE {
        return Err(Error::Format(format!(
            "checkpoint holds {} tensors, requested {}",
            manifest.dtype,
            T::DTYPE
        )));
    }
    let payload = fs::read(path.with_file_name(&manifest.payload))?;
    let mut out = Vec::with_capacity(manifest.tensors.len());
    for r in &manifest.tensors {
        let len: usize = r.shape.iter().product();
        if r.bytes as usize != len * T::BYTES {
            return Err(Error::Format(format!("tensor {} has inconsistent byte count", r.name)));
        }
        let start = r.offset as usize;
        let raw = payload
            .get(start..start + r.bytes as usize)
            .ok_or_else(|| Error::Format(format!("tensor {} lies outside the payload", r.name)))?;
        let data = raw.chunks_exact(T::BYTES).map(T::read_le).collect();
        out.push((r.name.clone(), RealTensor::new(r.shape, data)?));
    }
    Ok((manifest, out))
}

fn assign<T: Scalar>(
    slots: Vec<(String, &mut RealTensor<T>)>,
    records: &mut std::collections::BTreeMap<String, RealTensor<T>>,
) -> Result<()> {
    for (name, slot) in slots {
        let t = records
            .remove(&name)
            .ok_or_else(|| Error::Format(format!("checkpoint lacks tensor {name}")))?;
        if t.shape() != slot.shape() {
            return Err(Error::Shape(format!(
                "tensor {name} has shape {:?}, model expects {:?}",
                t.shape(),
                slot.shape()
            )));
        }
        *slot = t;
    }
    Ok(())
}

impl<T: Scalar> Donet<T> {
    /// Parameters followed by BN running statistics.
    pub fn named_state(&self) -> Vec<(String, &RealTensor<T>)> {
        let mut v = self.tensors();
        v.extend(self.buffers());
        v
    }

    pub fn save(&self, path: &Path, extra: serde_json::Value) -> Result<CheckpointManifest> {
        write_checkpoint(path, &self.config, &self.named_state(), extra)
    }

    /// Builds a model from checkpoint tensors. Names outside the model
    /// state must carry the `optim.` prefix.
    pub fn from_tensors(config: CascadeConfig, tensors: Vec<(String, RealTensor<T>)>) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut map: std::collections::BTreeMap<_, _> = tensors.into_iter().collect();
        assign(model.tensors_mut(), &mut map)?;
        assign(model.buffers_mut(), &mut map)?;
        if let Some(name) = map.keys().find(|k| !k.starts_with("optim.")) {
            return Err(Error::Format(format!("unexpected tensor {name} in checkpoint")));
        }
        Ok(model)
    }

    pub fn load(path: &Path) -> Result<(Self, CheckpointManifest)> {
        let (manifest, tensors) = read_checkpoint(path)?;
        manifest.config.validate()?;
        Ok((Self::from_tensors(manifest.config, tensors)?, manifest))
    }
}
