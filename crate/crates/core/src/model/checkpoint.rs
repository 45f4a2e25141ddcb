//! Checkpoint files.
//!
//! Layout: the magic `IDN1`, a version byte, a little-endian `u32` header
//! length, a JSON header (config, metadata, tensor table), then the raw
//! little-endian tensor payloads in table order.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DType, Element};

use super::config::ModelConfig;
use super::network::{zeros, Checkpoint, CheckpointMeta};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"IDN1";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    dims: Vec<usize>,
    /// Byte offset from the start of the payload.
    offset: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    dtype: DType,
    config: ModelConfig,
    meta: CheckpointMeta,
    tensors: Vec<TensorEntry>,
}

fn tensor_names(config: &ModelConfig) -> Vec<String> {
    let mut names = Vec::new();
    for (li, layer) in config.layers.iter().enumerate() {
        for pi in 0..layer.paths().len() {
            names.push(format!("layer{li}.path{pi}.weights"));
            names.push(format!("layer{li}.path{pi}.biases"));
        }
    }
    names
}

pub fn to_bytes<T: Element>(ckpt: &Checkpoint<T>) -> Result<Vec<u8>> {
    ckpt.validate()?;
    let params = ckpt.params();
    let mut offset = 0;
    let tensors = tensor_names(&ckpt.config)
        .into_iter()
        .zip(&params)
        .map(|(name, t)| {
            let e = TensorEntry {
                name,
                dims: t.dims().to_vec(),
                offset,
            };
            offset += t.len() * T::DTYPE.size();
            e
        })
        .collect();
    let header = serde_json::to_vec(&Header {
        dtype: T::DTYPE,
        config: ckpt.config.clone(),
        meta: ckpt.meta.clone(),
        tensors,
    })?;
    let header_len = u32::try_from(header.len()).map_err(|_| Error::format("checkpoint header too large"))?;
    let mut out = Vec::with_capacity(9 + header.len() + offset);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.push(CHECKPOINT_VERSION);
    out.extend_from_slice(&header_len.to_le_bytes());
    out.extend_from_slice(&header);
    for t in params {
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

/// Parses a checkpoint, converting the stored element type to `T` if needed.
pub fn from_bytes<T: Element>(bytes: &[u8]) -> Result<Checkpoint<T>> {
    if bytes.len() < 9 {
        return Err(Error::format("checkpoint truncated before header"));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format("not a checkpoint (bad magic)"));
    }
    if bytes[4] != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion {
            found: bytes[4],
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let payload_start = 9usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::format("checkpoint truncated inside header"))?;
    let header: Header = serde_json::from_slice(&bytes[9..payload_start])
        .map_err(|e| Error::format(format!("checkpoint header: {e}")))?;
    let payload = &bytes[payload_start..];

    let mut ckpt = zeros::<T>(&header.config)?;
    ckpt.meta = header.meta;
    let names = tensor_names(&header.config);
    if header.tensors.len() != names.len() {
        return Err(Error::shape(format!(
            "checkpoint lists {} tensors, config needs {}",
            header.tensors.len(),
            names.len()
        )));
    }
    let size = header.dtype.size();
    let mut expected_offset = 0;
    for (entry, param) in header.tensors.iter().zip(ckpt.params_mut()) {
        if entry.dims != param.dims() {
            return Err(Error::shape(format!(
                "tensor {} has dims {:?}, config needs {:?}",
                entry.name,
                entry.dims,
                param.dims()
            )));
        }
        if entry.offset != expected_offset {
            return Err(Error::format(format!("tensor {} at unexpected offset", entry.name)));
        }
        let nbytes = param.len() * size;
        let raw = payload
            .get(entry.offset..entry.offset + nbytes)
            .ok_or_else(|| Error::format(format!("checkpoint truncated inside {}", entry.name)))?;
        for (dst, chunk) in param.data_mut().iter_mut().zip(raw.chunks_exact(size)) {
            *dst = match header.dtype {
                DType::F32 => T::from_f64(f32::read_le(chunk) as f64),
                DType::F64 => T::from_f64(f64::read_le(chunk)),
            };
        }
        expected_offset += nbytes;
    }
    if payload.len() != expected_offset {
        return Err(Error::format(format!(
            "checkpoint has {} trailing bytes",
            payload.len() as isize - expected_offset as isize
        )));
    }
    ckpt.validate()?;
    Ok(ckpt)
}

pub fn save<T: Element>(ckpt: &Checkpoint<T>, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(ckpt)?)?;
    Ok(())
}

pub fn load<T: Element>(path: impl AsRef<Path>) -> Result<Checkpoint<T>> {
    from_bytes(&fs::read(path)?)
}

/// Loads a checkpoint and requires its config to equal `expected`.
pub fn load_expecting<T: Element>(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Checkpoint<T>> {
    let ckpt = load::<T>(path)?;
    if &ckpt.config != expected {
        return Err(Error::shape(format!(
            "checkpoint holds '{}', expected '{}'",
            ckpt.config.name, expected.name
        )));
    }
    Ok(ckpt)
}

/// Reads only the element type recorded in a checkpoint header.
pub fn stored_dtype(bytes: &[u8]) -> Result<DType> {
    if bytes.len() < 9 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::format("not a checkpoint"));
    }
    let header_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
    let header: Header = serde_json::from_slice(
        bytes
            .get(9..9 + header_len)
            .ok_or_else(|| Error::format("checkpoint truncated inside header"))?,
    )?;
    Ok(header.dtype)
}
