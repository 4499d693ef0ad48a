//! Parameter checkpoints (little-endian):
//!
//! ```text
//! "CKPT" | version u16 | config_len u32 | config JSON | tensor_count u32
//! per tensor: name_len u16 | UTF-8 name | rank u8 | rank x u32 dims | f32 data
//! ```

use std::fs;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"CKPT";
pub const CHECKPOINT_VERSION: u16 = 1;

pub fn encode_checkpoint(config: &Value, params: &ParamStore<f32>) -> Result<Vec<u8>> {
    let cfg = serde_json::to_vec(config)?;
    let mut out = Vec::new();
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in params.iter() {
        let name_len = u16::try_from(name.len())
            .map_err(|_| Error::Contract(format!("parameter name too long: {name}")))?;
        out.extend_from_slice(&name_len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_checkpoint(
    path: impl AsRef<Path>,
    config: &Value,
    params: &ParamStore<f32>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(config, params)?).map_err(|e| Error::io(path, e))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<(Value, ParamStore<f32>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}

/// Shape summary of a stored tensor.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TensorHeader {
    pub name: String,
    pub shape: Vec<usize>,
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Value, ParamStore<f32>)> {
    let mut pos = 0usize;
    let mut take = |n: usize, what: &str| -> Result<(usize, &[u8])> {
        if bytes.len() - pos < n {
            return Err(Error::Format {
                offset: pos as u64,
                message: format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    bytes.len() - pos
                ),
            });
        }
        let at = pos;
        pos += n;
        Ok((at, &bytes[at..at + n]))
    };
    let fail = |offset: usize, message: String| Error::Format {
        offset: offset as u64,
        message,
    };

    let (_, magic) = take(4, "magic")?;
    if magic != CHECKPOINT_MAGIC {
        return Err(fail(0, format!("bad magic {magic:?}, expected \"CKPT\"")));
    }
    let (_, v) = take(2, "version")?;
    let version = u16::from_le_bytes([v[0], v[1]]);
    if version != CHECKPOINT_VERSION {
        return Err(fail(4, format!("unsupported checkpoint version {version}")));
    }
    let u32_at = |b: &[u8]| u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize;
    let (_, b) = take(4, "config length")?;
    let cfg_len = u32_at(b);
    let (cfg_at, cfg) = take(cfg_len, "config")?;
    let config: Value = serde_json::from_slice(cfg)
        .map_err(|e| fail(cfg_at, format!("config is not JSON: {e}")))?;
    let (_, b) = take(4, "tensor count")?;
    let count = u32_at(b);
    let mut params = ParamStore::new();
    for _ in 0..count {
        let (_, b) = take(2, "name length")?;
        let name_len = u16::from_le_bytes([b[0], b[1]]) as usize;
        let (name_at, raw) = take(name_len, "tensor name")?;
        let name = std::str::from_utf8(raw)
            .map_err(|_| fail(name_at, "tensor name is not UTF-8".into()))?
            .to_owned();
        let (_, b) = take(1, "rank")?;
        let rank = b[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let (_, b) = take(4, "dim")?;
            shape.push(u32_at(b));
        }
        let numel: usize = shape.iter().product();
        let (data_at, raw) = take(numel * 4, "tensor data")?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let tensor = Tensor::new(shape, data).map_err(|e| fail(data_at, e.to_string()))?;
        params
            .insert(name, tensor)
            .map_err(|e| fail(name_at, e.to_string()))?;
    }
    if pos != bytes.len() {
        return Err(fail(pos, format!("{} trailing bytes", bytes.len() - pos)));
    }
    Ok((config, params))
}

/// Config and tensor shapes without keeping the data.
pub fn scan_checkpoint(bytes: &[u8]) -> Result<(Value, Vec<TensorHeader>)> {
    let (config, params) = decode_checkpoint(bytes)?;
    let headers = params
        .iter()
        .map(|(n, t)| TensorHeader {
            name: n.to_owned(),
            shape: t.shape().to_vec(),
        })
        .collect();
    Ok((config, headers))
}
