//! Parameter archives.
//!
//! ```text
//! magic "MTRKCKPT" | u32 LE version | u64 LE header length | JSON header | f32 LE data
//! ```
//!
//! The header echoes the model config and lists tensors in storage order.

use std::io::{Read, Write};
use std::path::Path;

use masktrack_core::model::{ModelConfig, Network};
use masktrack_core::{Scalar, Tensor};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"MTRKCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    model: ModelConfig,
    config_hash: String,
    tensors: Vec<TensorEntry>,
}

pub fn encode<T: Scalar>(net: &Network<T>, config_hash: &str) -> Vec<u8> {
    let params = net.params();
    let header = Header {
        model: net.config().clone(),
        config_hash: config_hash.to_string(),
        tensors: params
            .iter()
            .map(|(name, t)| TensorEntry {
                name: name.to_string(),
                shape: t.shape().to_vec(),
            })
            .collect(),
    };
    let json = serde_json::to_vec(&header).expect("header serialises");
    let mut out = Vec::with_capacity(20 + json.len() + params.scalar_count() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in params.iter() {
        for &v in t.data() {
            out.extend_from_slice(&(Scalar::to_f64(v) as f32).to_le_bytes());
        }
    }
    out
}

pub fn save<T: Scalar>(path: &Path, net: &Network<T>, config_hash: &str) -> Result<()> {
    let bytes = encode(net, config_hash);
    let mut f = std::fs::File::create(path).map_err(Error::io(path))?;
    f.write_all(&bytes).map_err(Error::io(path))
}

/// Decodes an archive; `expected` must equal the stored model config.
pub fn decode<T: Scalar>(bytes: &[u8], expected: &ModelConfig) -> Result<Network<T>> {
    let bad = |m: &str| Error::Checkpoint(m.to_string());
    if bytes.len() < 20 || &bytes[..8] != MAGIC {
        return Err(bad("not a checkpoint archive"));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!(
            "archive version {version} (expected {CHECKPOINT_VERSION})"
        )));
    }
    let len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes"));
    let body = &bytes[20..];
    let len = usize::try_from(len)
        .ok()
        .filter(|&l| l <= body.len())
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&body[..len]).map_err(|e| Error::Checkpoint(format!("header: {e}")))?;
    if &header.model != expected {
        return Err(bad("stored model config differs from the configured model"));
    }
    let mut data = &body[len..];
    let mut named = Vec::with_capacity(header.tensors.len());
    for entry in header.tensors {
        let n: usize = entry.shape.iter().product();
        let mut raw = vec![0u8; n * 4];
        data.read_exact(&mut raw)
            .map_err(|_| Error::Checkpoint(format!("tensor {} truncated", entry.name)))?;
        let values = raw
            .chunks_exact(4)
            .map(|c| T::of(f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64))
            .collect();
        named.push((entry.name, Tensor::from_vec(&entry.shape, values)?));
    }
    if !data.is_empty() {
        return Err(bad("trailing bytes after tensor data"));
    }
    let mut net = Network::new(header.model, 0)?;
    net.params_mut().load(named)?;
    Ok(net)
}

pub fn load<T: Scalar>(path: &Path, expected: &ModelConfig) -> Result<Network<T>> {
    let bytes = std::fs::read(path).map_err(Error::io(path))?;
    decode(&bytes, expected).map_err(|e| match e {
        Error::Checkpoint(m) => Error::Checkpoint(format!("{}: {m}", path.display())),
        other => other,
    })
}
