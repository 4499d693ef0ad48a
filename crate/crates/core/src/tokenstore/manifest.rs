//! JSON-lines dataset manifest:
//! `{"id": .., "embedding_file": .., "request": 0|1, "complaint": 0|1, "split": "train"|"dev"|"test"}`.
//! Embedding paths are resolved relative to the manifest's directory.

use std::collections::HashMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{read_embedding_file, Labels, SampleRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Dev,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Dev => "dev",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "dev" => Ok(Split::Dev),
            "test" => Ok(Split::Test),
            _ => Err(Error::Config(format!("unknown split {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    pub id: String,
    /// Path as written in the manifest.
    pub embedding_file: String,
    /// `embedding_file` resolved against the manifest directory.
    pub resolved_path: PathBuf,
    pub labels: Labels,
    pub split: Split,
    pub line: usize,
}

impl ManifestEntry {
    pub fn load(&self) -> Result<SampleRecord> {
        let sets = read_embedding_file(&self.resolved_path)?;
        SampleRecord::new(self.id.clone(), sets, self.labels)
    }
}

#[derive(Serialize)]
struct LineOut<'a> {
    id: &'a str,
    embedding_file: &'a str,
    request: u8,
    complaint: u8,
    split: Split,
}

/// Serialize one manifest line (without trailing newline).
pub fn manifest_line(
    id: &str,
    embedding_file: &str,
    labels: Labels,
    split: Split,
) -> Result<String> {
    Ok(serde_json::to_string(&LineOut {
        id,
        embedding_file,
        request: u8::from(labels.request),
        complaint: u8::from(labels.complaint),
        split,
    })?)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[ManifestEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::new();
    for e in entries {
        writeln!(
            buf,
            "{}",
            manifest_line(&e.id, &e.embedding_file, e.labels, e.split)?
        )
        .expect("write to Vec");
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}

fn binary_label(
    obj: &serde_json::Map<String, Value>,
    key: &str,
) -> std::result::Result<bool, String> {
    match obj.get(key) {
        None => Err(format!("missing field {key:?}")),
        Some(v) => match v.as_u64() {
            Some(0) => Ok(false),
            Some(1) => Ok(true),
            _ => Err(format!("label {key:?} must be 0 or 1, got {v}")),
        },
    }
}

/// Parse and validate a manifest. Every problem is reported with its line number.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Vec<ManifestEntry>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let err = |line: usize, message: String| Error::Manifest {
        path: path.to_path_buf(),
        line,
        message,
    };

    let mut entries = Vec::new();
    let mut seen: HashMap<String, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(raw).map_err(|e| err(line, format!("malformed JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| err(line, "record is not a JSON object".into()))?;
        let string_field = |key: &str| -> Result<String> {
            obj.get(key)
                .and_then(Value::as_str)
                .map(str::to_owned)
                .ok_or_else(|| err(line, format!("missing or non-string field {key:?}")))
        };
        let id = string_field("id")?;
        let embedding_file = string_field("embedding_file")?;
        let split: Split = string_field("split")?
            .parse()
            .map_err(|e: Error| err(line, e.to_string()))?;
        let request = binary_label(obj, "request").map_err(|m| err(line, m))?;
        let complaint = binary_label(obj, "complaint").map_err(|m| err(line, m))?;
        if let Some(first) = seen.insert(id.clone(), line) {
            return Err(err(
                line,
                format!("duplicate id {id:?} (first seen on line {first})"),
            ));
        }
        let resolved_path = base.join(&embedding_file);
        if !resolved_path.is_file() {
            return Err(err(
                line,
                format!("embedding file {} does not exist", resolved_path.display()),
            ));
        }
        entries.push(ManifestEntry {
            id,
            embedding_file,
            resolved_path,
            labels: Labels { request, complaint },
            split,
            line,
        });
    }
    Ok(entries)
}
