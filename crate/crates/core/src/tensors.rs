// SPDX-License-Identifier: MIT OR Apache-2.0

//! Named-tensor container used for toy-model weights and SAE encoders.
//!
//! Layout: an 8-byte little-endian header length `N`, `N` bytes of UTF-8 JSON,
//! then raw little-endian `f32` data. The JSON object carries a `tensors`
//! index (`name`, `shape`, byte `offset` into the data section, byte `length`)
//! alongside any caller-supplied keys.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        Self { name: name.into(), shape, data }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    length: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    #[serde(flatten)]
    extra: Map<String, Value>,
    tensors: Vec<IndexEntry>,
}

pub fn encode(extra: Map<String, Value>, tensors: &[NamedTensor]) -> Result<Vec<u8>> {
    let mut index = Vec::with_capacity(tensors.len());
    let mut offset = 0;
    for t in tensors {
        if t.shape.iter().product::<usize>() != t.data.len() {
            return Err(Error::consistency(format!("tensor {} shape {:?} does not match data", t.name, t.shape)));
        }
        let length = t.data.len() * 4;
        index.push(IndexEntry { name: t.name.clone(), shape: t.shape.clone(), offset, length });
        offset += length;
    }
    let header = serde_json::to_vec(&Header { extra, tensors: index })?;
    let mut out = Vec::with_capacity(8 + header.len() + offset);
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for t in tensors {
        for v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(Map<String, Value>, Vec<NamedTensor>)> {
    let header_len = bytes
        .get(..8)
        .map(|b| u64::from_le_bytes(b.try_into().unwrap()) as usize)
        .ok_or_else(|| Error::validation("tensor file shorter than its length prefix"))?;
    let header_end = 8usize
        .checked_add(header_len)
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::validation("tensor header extends past end of file"))?;
    let header: Header = serde_json::from_slice(&bytes[8..header_end])
        .map_err(|e| Error::validation(format!("tensor header: {e}")))?;
    let data = &bytes[header_end..];
    let mut tensors = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        let expected = entry.shape.iter().product::<usize>() * 4;
        if entry.length != expected {
            return Err(Error::validation(format!("tensor {}: length {} != shape size {expected}", entry.name, entry.length)));
        }
        let raw = data
            .get(entry.offset..entry.offset + entry.length)
            .ok_or_else(|| Error::validation(format!("tensor {} is truncated", entry.name)))?;
        let values: Vec<f32> = raw.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("tensor {} has a non-finite value at {i}", entry.name)));
        }
        tensors.push(NamedTensor { name: entry.name, shape: entry.shape, data: values });
    }
    Ok((header.extra, tensors))
}

pub fn write(path: &Path, extra: Map<String, Value>, tensors: &[NamedTensor]) -> Result<()> {
    fs::write(path, encode(extra, tensors)?)?;
    Ok(())
}

pub fn read(path: &Path) -> Result<(Map<String, Value>, Vec<NamedTensor>)> {
    decode(&fs::read(path)?)
}

/// Removes and returns the tensor called `name`, checking its shape.
pub(crate) fn take(tensors: &mut Vec<NamedTensor>, name: &str, shape: &[usize]) -> Result<Vec<f32>> {
    let i = tensors
        .iter()
        .position(|t| t.name == name)
        .ok_or_else(|| Error::validation(format!("missing tensor {name}")))?;
    let t = tensors.swap_remove(i);
    if t.shape != shape {
        return Err(Error::validation(format!("tensor {name}: shape {:?}, expected {shape:?}", t.shape)));
    }
    Ok(t.data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encode_decode_is_lossless() {
        let tensors = vec![
            NamedTensor::new("a", vec![2, 2], vec![1.0, -2.5, 3.25, 0.0]),
            NamedTensor::new("b", vec![3], vec![f32::MIN_POSITIVE, 7.0, -0.0]),
        ];
        let mut extra = Map::new();
        extra.insert("seed".into(), 5.into());
        let bytes = encode(extra.clone(), &tensors).unwrap();
        let (extra2, back) = decode(&bytes).unwrap();
        assert_eq!(extra2, extra);
        assert_eq!(back, tensors);
        assert_eq!(encode(extra2, &back).unwrap(), bytes);
    }

    #[test]
    fn truncation_and_nan_are_rejected() {
        let tensors = vec![NamedTensor::new("a", vec![2], vec![1.0, 2.0])];
        let bytes = encode(Map::new(), &tensors).unwrap();
        assert!(matches!(decode(&bytes[..bytes.len() - 1]), Err(Error::Validation(_))));
        let nan = encode(Map::new(), &[NamedTensor::new("a", vec![1], vec![f32::NAN])]).unwrap();
        assert!(matches!(decode(&nan), Err(Error::Validation(_))));
    }
}
