//! Weights file format.
//!
//! ```text
//! b"FERW" | u32 LE version (1) | u64 LE header length | header | payload
//! ```
//!
//! The header is UTF-8 JSON: `{"config": ResNetConfig, "tensors": [{"layer",
//! "role", "shape", "offset"}, ...]}` listing every stored tensor in build
//! order. `offset` is the byte offset of the tensor within the payload, which
//! holds little-endian `f32` values in header order.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::Role;
use super::resnet::{ResNet, ResNetConfig};
use crate::error::{Error, Result};
use crate::tensor::Rng;

pub const MAGIC: &[u8; 4] = b"FERW";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub layer: String,
    pub role: String,
    pub shape: Vec<usize>,
    pub offset: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightsHeader {
    pub config: ResNetConfig,
    pub tensors: Vec<TensorEntry>,
}

fn err(msg: impl Into<String>) -> Error {
    Error::Weights(msg.into())
}

/// Serializes `model` into the weights format.
pub fn encode_weights(model: &ResNet<f32>) -> Vec<u8> {
    let mut tensors = Vec::new();
    let mut payload = Vec::new();
    for slot in model.slots() {
        tensors.push(TensorEntry {
            layer: slot.layer,
            role: slot.role.as_str().to_string(),
            shape: slot.tensor.shape().to_vec(),
            offset: payload.len() as u64,
        });
        for v in slot.tensor.data() {
            payload.extend_from_slice(&v.to_le_bytes());
        }
    }
    let header = serde_json::to_vec(&WeightsHeader {
        config: model.config().clone(),
        tensors,
    })
    .expect("header serializes");
    let mut out = Vec::with_capacity(16 + header.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&payload);
    out
}

pub fn save_weights(model: &ResNet<f32>, path: impl AsRef<Path>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&encode_weights(model))?;
    f.flush()?;
    Ok(())
}

/// Splits a weights file into its header and payload.
pub fn decode_header(bytes: &[u8]) -> Result<(WeightsHeader, &[u8])> {
    if bytes.len() < 16 {
        return Err(err(format!("file truncated: {} bytes, need at least 16", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(err("bad magic, not a FERW weights file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(err(format!("unsupported version {version}, expected {VERSION}")));
    }
    let header_len = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
    let header_end = 16usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| err("file truncated inside header"))?;
    let header: WeightsHeader = serde_json::from_slice(&bytes[16..header_end])
        .map_err(|e| err(format!("malformed header: {e}")))?;
    Ok((header, &bytes[header_end..]))
}

/// Copies the file's tensors into an existing model, checking that names,
/// roles and shapes agree with the model's build order.
pub fn load_weights_into(model: &mut ResNet<f32>, bytes: &[u8]) -> Result<()> {
    let (header, payload) = decode_header(bytes)?;
    let slots = model.slots_mut();
    if header.tensors.len() != slots.len() {
        return Err(err(format!(
            "file lists {} tensors, model has {}",
            header.tensors.len(),
            slots.len()
        )));
    }
    for (entry, slot) in header.tensors.iter().zip(slots) {
        let role = Role::parse(&entry.role)
            .ok_or_else(|| err(format!("layer {}: unknown role {:?}", entry.layer, entry.role)))?;
        if entry.layer != slot.layer || role != slot.role {
            return Err(err(format!(
                "expected {}/{} but file has {}/{}",
                slot.layer,
                slot.role.as_str(),
                entry.layer,
                entry.role
            )));
        }
        if entry.shape != slot.tensor.shape() {
            return Err(err(format!(
                "layer {} {}: file shape {:?} does not match model shape {:?}",
                entry.layer,
                entry.role,
                entry.shape,
                slot.tensor.shape()
            )));
        }
        let start = entry.offset as usize;
        let end = start + 4 * slot.tensor.len();
        let raw = payload.get(start..end).ok_or_else(|| {
            err(format!("file truncated in payload of layer {} {}", entry.layer, entry.role))
        })?;
        for (dst, chunk) in slot.tensor.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *dst = f32::from_le_bytes(chunk.try_into().unwrap());
        }
    }
    Ok(())
}

/// Builds a model from the file's config and fills in its tensors.
pub fn decode_weights(bytes: &[u8]) -> Result<ResNet<f32>> {
    let (header, _) = decode_header(bytes)?;
    let mut model = ResNet::new(header.config, &mut Rng::new(0))?;
    load_weights_into(&mut model, bytes)?;
    Ok(model)
}

pub fn load_weights(path: impl AsRef<Path>) -> Result<ResNet<f32>> {
    decode_weights(&fs::read(path)?)
}
