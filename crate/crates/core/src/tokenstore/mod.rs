//! Token sets, uniformization, the binary embedding format and manifests.

mod embfile;
mod manifest;
mod rng;
mod tokenset;

pub use embfile::{
    decode_embeddings, encode_embeddings, read_embedding_file, scan_embeddings,
    write_embedding_file, ModalityHeader, EMBEDDING_MAGIC, EMBEDDING_VERSION,
};
pub use manifest::{load_manifest, manifest_line, write_manifest, ManifestEntry, Split};
pub use rng::{mix64, Rng};
pub use tokenset::{
    prepend_class_token, uniformize, uniformize_indices, Labels, Modality, SampleRecord, Task,
    TokenSet,
};
