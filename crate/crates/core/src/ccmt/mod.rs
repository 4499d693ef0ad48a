//! The cascaded cross-modal transformer, its building blocks and checkpoints.

mod block;
mod checkpoint;
mod config;
mod init;
mod input;
mod model;

pub use block::{attention, cross_attention_block, feed_forward, init_block, BlockVars};
pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, scan_checkpoint, write_checkpoint,
    TensorHeader, CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use config::{CcmtConfig, InitScheme};
pub use init::Initializer;
pub use input::{
    add_positional, class_token_name, embed_modality, has_learned_class_token, heads_forward,
    init_heads, pos_name, prepare_input, ModelInput,
};
pub use model::{ccmt_forward, CascadeLayout, Ccmt};

/// Parameter prefixes of the request and complaint heads.
pub fn head_names() -> [&'static str; 2] {
    ["head.request", "head.complaint"]
}
