use crate::ccmt::{cross_attention_block, heads_forward, BlockVars, CcmtConfig};
use crate::error::{Error, Result};
use crate::numerics::{Bound, Graph, Real, Var};

pub const FUSION_CLASS_TOKEN: &str = "tf.cls";

pub fn block_prefix(i: usize) -> String {
    format!("tf.block.{i}")
}

/// Self-attention fusion: `[cls; tokens_1; ...; tokens_n]` through `cfg.depth`
/// blocks of the same form as the cascade blocks with `q = k = v`, heads read
/// the fusion class token.
pub fn transformer_fusion_forward<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound<'_>,
    cfg: &CcmtConfig,
    token_sets: &[Var],
) -> Result<(Var, Var)> {
    if token_sets.is_empty() {
        return Err(Error::Contract(
            "transformer fusion needs at least one modality".into(),
        ));
    }
    let cls = bound.var(FUSION_CLASS_TOKEN)?;
    let mut parts = Vec::with_capacity(token_sets.len() + 1);
    parts.push(cls);
    parts.extend_from_slice(token_sets);
    let mut x = g.concat_rows(&parts)?;
    for i in 0..cfg.depth {
        let p = BlockVars::bind(bound, &block_prefix(i), cfg.heads)?;
        x = cross_attention_block(g, x, x, x, &p, cfg)?;
    }
    let readout = g.row(x, 0)?;
    heads_forward(g, bound, readout)
}
