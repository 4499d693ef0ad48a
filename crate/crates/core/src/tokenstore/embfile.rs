//! Little-endian embedding interchange format:
//!
//! ```text
//! "CCMT" | version u16 = 1 | modality_count u16
//! per modality: name_len u8 | name (ASCII) | has_class_token u8
//!               | token_count u32 | dim u32 | token_count*dim f32 row-major
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::{Modality, TokenSet};
use crate::error::{Error, Result};
use crate::numerics::Tensor;

pub const EMBEDDING_MAGIC: &[u8; 4] = b"CCMT";
pub const EMBEDDING_VERSION: u16 = 1;

/// Serialize token sets into the interchange byte layout.
pub fn encode_embeddings(token_sets: &BTreeMap<Modality, TokenSet>) -> Result<Vec<u8>> {
    if token_sets.is_empty() {
        return Err(Error::Contract(
            "embedding file needs at least one modality".into(),
        ));
    }
    let count = u16::try_from(token_sets.len())
        .map_err(|_| Error::Contract("too many modalities".into()))?;
    let mut out = Vec::new();
    out.extend_from_slice(EMBEDDING_MAGIC);
    out.extend_from_slice(&EMBEDDING_VERSION.to_le_bytes());
    out.extend_from_slice(&count.to_le_bytes());
    for (modality, ts) in token_sets {
        if ts.modality != *modality {
            return Err(Error::Contract(format!(
                "token set keyed as {modality} is tagged {}",
                ts.modality
            )));
        }
        let name = modality.name().as_bytes();
        out.push(name.len() as u8);
        out.extend_from_slice(name);
        out.push(u8::from(ts.has_class_token()));
        let rows = u32::try_from(ts.count())
            .map_err(|_| Error::Contract("token count overflows u32".into()))?;
        let dim =
            u32::try_from(ts.dim()).map_err(|_| Error::Contract("dim overflows u32".into()))?;
        out.extend_from_slice(&rows.to_le_bytes());
        out.extend_from_slice(&dim.to_le_bytes());
        for v in ts.tokens().data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_embedding_file(
    path: impl AsRef<Path>,
    token_sets: &BTreeMap<Modality, TokenSet>,
) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_embeddings(token_sets)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_embedding_file(path: impl AsRef<Path>) -> Result<BTreeMap<Modality, TokenSet>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_embeddings(&bytes)
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(Error::Format {
                offset: self.pos as u64,
                message: format!(
                    "truncated {what}: need {n} bytes, {} remain",
                    self.bytes.len() - self.pos
                ),
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self, what: &str) -> Result<u8> {
        Ok(self.take(1, what)?[0])
    }

    fn u16(&mut self, what: &str) -> Result<u16> {
        let b = self.take(2, what)?;
        Ok(u16::from_le_bytes([b[0], b[1]]))
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn fail(&self, offset: usize, message: impl Into<String>) -> Error {
        Error::Format {
            offset: offset as u64,
            message: message.into(),
        }
    }
}

/// Header of one modality block, as reported by [`scan_embeddings`].
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ModalityHeader {
    pub name: String,
    pub has_class_token: bool,
    pub token_count: u32,
    pub dim: u32,
    pub offset: u64,
}

pub fn decode_embeddings(bytes: &[u8]) -> Result<BTreeMap<Modality, TokenSet>> {
    parse(bytes, true).map(|(sets, _)| sets)
}

/// Validate a file and return its block headers without keeping the payload.
pub fn scan_embeddings(bytes: &[u8]) -> Result<Vec<ModalityHeader>> {
    parse(bytes, false).map(|(_, headers)| headers)
}

fn parse(bytes: &[u8], keep: bool) -> Result<(BTreeMap<Modality, TokenSet>, Vec<ModalityHeader>)> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != EMBEDDING_MAGIC {
        return Err(cur.fail(0, format!("bad magic {magic:?}, expected \"CCMT\"")));
    }
    let version = cur.u16("version")?;
    if version != EMBEDDING_VERSION {
        return Err(cur.fail(4, format!("unsupported version {version}")));
    }
    let n = cur.u16("modality count")?;
    if n == 0 {
        return Err(cur.fail(6, "file declares zero modalities"));
    }
    let mut sets = BTreeMap::new();
    let mut headers = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let block_start = cur.pos;
        let name_len = cur.u8("name length")? as usize;
        let name_at = cur.pos;
        let raw = cur.take(name_len, "modality name")?;
        let name = std::str::from_utf8(raw)
            .ok()
            .filter(|s| s.is_ascii())
            .ok_or_else(|| cur.fail(name_at, "modality name is not ASCII"))?;
        let modality: Modality = name
            .parse()
            .map_err(|_| cur.fail(name_at, format!("unknown modality {name:?}")))?;
        if modality.name() != name {
            return Err(cur.fail(name_at, format!("non-canonical modality name {name:?}")));
        }
        let flag_at = cur.pos;
        let has_class_token = match cur.u8("class flag")? {
            0 => false,
            1 => true,
            other => return Err(cur.fail(flag_at, format!("class flag {other} is not 0/1"))),
        };
        let count_at = cur.pos;
        let count = cur.u32("token count")?;
        let dim = cur.u32("dim")?;
        if count == 0 || dim == 0 {
            return Err(cur.fail(count_at, format!("empty token matrix {count}x{dim}")));
        }
        let payload_at = cur.pos;
        let numel = count as usize * dim as usize;
        let payload = cur.take(numel * 4, "token payload")?;
        headers.push(ModalityHeader {
            name: name.to_owned(),
            has_class_token,
            token_count: count,
            dim,
            offset: block_start as u64,
        });
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        if let Some(bad) = data.iter().position(|v| !v.is_finite()) {
            return Err(cur.fail(payload_at + 4 * bad, "non-finite token value"));
        }
        if sets.contains_key(&modality)
            || headers[..headers.len() - 1].iter().any(|h| h.name == name)
        {
            return Err(cur.fail(block_start, format!("duplicate modality {name}")));
        }
        if keep {
            let tensor = Tensor::matrix(count as usize, dim as usize, data)?;
            sets.insert(modality, TokenSet::new(modality, tensor, has_class_token)?);
        }
    }
    if cur.pos != bytes.len() {
        return Err(cur.fail(cur.pos, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    Ok((sets, headers))
}
