//! Named-tensor container with a JSON header.
//!
//! Layout: `RGATCKPT` magic, `u32` format version, `u64` header length,
//! UTF-8 JSON header, then each tensor's `f64` values little-endian in
//! header order. All integers are little-endian.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use super::NnError;

pub const MAGIC: &[u8; 8] = b"RGATCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

pub fn write_checkpoint<W: Write>(
    mut out: W,
    config: &serde_json::Value,
    tensors: &[(&str, &Tensor)],
) -> Result<(), NnError> {
    let header = Header {
        config: config.clone(),
        tensors: tensors
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.to_string(),
                dtype: "f64".into(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).map_err(|e| NnError::Checkpoint(e.to_string()))?;
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    out.write_all(&(json.len() as u64).to_le_bytes())?;
    out.write_all(&json)?;
    for (_, t) in tensors {
        out.write_all(&t.to_le_bytes())?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<(serde_json::Value, Vec<(String, Tensor)>), NnError> {
    let mut magic = [0u8; 8];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(NnError::Checkpoint("not a checkpoint file (bad magic)".into()));
    }
    let mut word = [0u8; 4];
    input.read_exact(&mut word)?;
    let version = u32::from_le_bytes(word);
    if version != FORMAT_VERSION {
        return Err(NnError::Checkpoint(format!("unsupported format version {version}")));
    }
    let mut len = [0u8; 8];
    input.read_exact(&mut len)?;
    let mut json = vec![0u8; u64::from_le_bytes(len) as usize];
    input.read_exact(&mut json)?;
    let header: Header = serde_json::from_slice(&json).map_err(|e| NnError::Checkpoint(e.to_string()))?;

    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        if entry.dtype != "f64" {
            return Err(NnError::Checkpoint(format!("{}: unsupported dtype {}", entry.name, entry.dtype)));
        }
        let count: usize = entry.shape.iter().product();
        let mut raw = vec![0u8; count * 8];
        input.read_exact(&mut raw)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        tensors.push((entry.name, Tensor::new(entry.shape, data)?));
    }
    Ok((header.config, tensors))
}
