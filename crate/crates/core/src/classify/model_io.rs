//! Model files: `"WTCN"`, a `u16` version, a `u32` descriptor length, the
//! JSON descriptor, then every parameter as a little-endian `f64` in
//! descriptor order.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::cnn::{Architecture, CnnModel};
use crate::error::{Error, Result};

pub const MODEL_MAGIC: &[u8; 4] = b"WTCN";
pub const MODEL_VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub len: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelDescriptor {
    pub architecture: Architecture,
    pub tensors: Vec<TensorInfo>,
}

impl ModelDescriptor {
    pub fn for_model(model: &CnnModel) -> Self {
        let mut tensors = Vec::new();
        for (i, b) in model.blocks.iter().enumerate() {
            for (part, len) in [
                ("weights", b.weights.len()),
                ("bias", b.bias.len()),
                ("gamma", b.gamma.len()),
                ("beta", b.beta.len()),
                ("running_mean", b.running_mean.len()),
                ("running_var", b.running_var.len()),
            ] {
                tensors.push(TensorInfo {
                    name: format!("block{}.{part}", i + 1),
                    len,
                });
            }
        }
        tensors.push(TensorInfo {
            name: "fc.weights".into(),
            len: model.fc_weights.len(),
        });
        tensors.push(TensorInfo {
            name: "fc.bias".into(),
            len: model.fc_bias.len(),
        });
        Self {
            architecture: model.arch.clone(),
            tensors,
        }
    }
}

pub fn write_model<W: Write>(model: &CnnModel, mut w: W) -> Result<()> {
    let desc = serde_json::to_vec(&ModelDescriptor::for_model(model))?;
    let len = u32::try_from(desc.len()).map_err(|_| Error::Format("model descriptor too large".into()))?;
    let flat = model.to_flat();
    let mut buf = Vec::with_capacity(10 + desc.len() + 8 * flat.len());
    buf.extend_from_slice(MODEL_MAGIC);
    buf.extend_from_slice(&MODEL_VERSION.to_le_bytes());
    buf.extend_from_slice(&len.to_le_bytes());
    buf.extend_from_slice(&desc);
    for v in flat {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(|e| Error::Format(format!("writing model: {e}")))
}

pub fn read_model(bytes: &[u8]) -> Result<CnnModel> {
    if bytes.len() < 10 || &bytes[..4] != MODEL_MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != MODEL_VERSION {
        return Err(Error::Format(format!("unsupported model version {version}")));
    }
    let len = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
    let rest = &bytes[10..];
    if rest.len() < len {
        return Err(Error::Format("truncated model descriptor".into()));
    }
    let desc: ModelDescriptor = serde_json::from_slice(&rest[..len])?;
    let payload = &rest[len..];
    if payload.len() % 8 != 0 {
        return Err(Error::Format("model payload is not a whole number of f64".into()));
    }
    let flat: Vec<f64> = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let declared: usize = desc.tensors.iter().map(|t| t.len).sum();
    if declared != flat.len() {
        return Err(Error::Format(format!(
            "descriptor declares {declared} parameters, payload holds {}",
            flat.len()
        )));
    }
    let model = CnnModel::from_flat(desc.architecture.clone(), &flat).map_err(|e| Error::Format(e.to_string()))?;
    if ModelDescriptor::for_model(&model) != desc {
        return Err(Error::Format("tensor table does not match the architecture".into()));
    }
    Ok(model)
}

pub fn save_model(model: &CnnModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<CnnModel> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}
