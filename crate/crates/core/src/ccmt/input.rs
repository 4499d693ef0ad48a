use std::collections::BTreeMap;

use super::{head_names, Initializer};
use crate::error::{Error, Result};
use crate::numerics::{Bound, Graph, Real, Tensor, Var};
use crate::tokenstore::{prepend_class_token, uniformize, Modality, Rng, SampleRecord};

/// Uniformized `k x d` token matrices of one sample, row 0 being the class slot.
///
/// Audio arrives without a class token; its row 0 is a zero placeholder that
/// the model replaces with the learnable audio class token.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub tokens: BTreeMap<Modality, Tensor<f32>>,
}

/// Modalities whose class token is a model parameter.
pub fn has_learned_class_token(m: Modality) -> bool {
    m == Modality::Audio
}

pub fn class_token_name(m: Modality) -> String {
    format!("class.{m}")
}

pub fn pos_name(m: Modality) -> String {
    format!("pos.{m}")
}

/// Attach class slots and uniformize every requested modality to `k` rows.
/// Modalities are processed in `modalities` order from one rng stream.
pub fn prepare_input(
    sample: &SampleRecord,
    modalities: &[Modality],
    k: usize,
    rng: &mut Rng,
) -> Result<ModelInput> {
    let mut tokens = BTreeMap::new();
    for &m in modalities {
        let ts = sample.get(m)?;
        let with_class = if has_learned_class_token(m) {
            if ts.has_class_token() {
                return Err(Error::Contract(format!(
                    "sample {}: {m} must not carry a class token; it is learned",
                    sample.id
                )));
            }
            prepend_class_token(ts, &vec![0.0; ts.dim()])?
        } else {
            if !ts.has_class_token() {
                return Err(Error::Contract(format!(
                    "sample {}: {m} token set has no class token",
                    sample.id
                )));
            }
            ts.clone()
        };
        tokens.insert(m, uniformize(&with_class, k, rng)?.into_tokens());
    }
    Ok(ModelInput { tokens })
}

/// Place one modality on the graph: learned class token swapped in when
/// applicable, then the modality's positional rows added when `positional`.
pub fn embed_modality<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound<'_>,
    input: &ModelInput,
    m: Modality,
    positional: bool,
) -> Result<Var> {
    let raw = input
        .tokens
        .get(&m)
        .ok_or_else(|| Error::Contract(format!("input is missing the {m} modality")))?;
    let x = if has_learned_class_token(m) {
        let body: Vec<usize> = (1..raw.rows()).collect();
        let body = g.constant(raw.gather_rows(&body).cast());
        let cls = bound.var(&class_token_name(m))?;
        if raw.rows() == 1 {
            cls
        } else {
            g.concat_rows(&[cls, body])?
        }
    } else {
        g.constant(raw.cast())
    };
    if positional {
        add_positional(g, bound, x, m)
    } else {
        Ok(x)
    }
}

/// `tokens + pos_embed[modality]`, class row included.
pub fn add_positional<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound<'_>,
    tokens: Var,
    m: Modality,
) -> Result<Var> {
    let pos = bound
        .var(&pos_name(m))
        .map_err(|_| Error::Config(format!("no positional encoding for modality {m}")))?;
    g.add(tokens, pos)
}

/// Two single-logit MLP heads `d -> d_mlp -> 1` reading the same vector.
pub fn init_heads(init: &mut Initializer<'_>, d: usize, d_mlp: usize) -> Result<()> {
    for prefix in head_names() {
        init.weight(&format!("{prefix}.w1"), d, d_mlp)?;
        init.zeros(&format!("{prefix}.b1"), d_mlp)?;
        init.weight(&format!("{prefix}.w2"), d_mlp, 1)?;
        init.zeros(&format!("{prefix}.b2"), 1)?;
    }
    Ok(())
}

pub fn heads_forward<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound<'_>,
    readout: Var,
) -> Result<(Var, Var)> {
    let mut logits = [readout; 2];
    for (slot, prefix) in logits.iter_mut().zip(head_names()) {
        let v = |s: &str| bound.var(&format!("{prefix}.{s}"));
        let h = g.matmul(readout, v("w1")?)?;
        let h = g.add_row(h, v("b1")?)?;
        let h = g.gelu(h);
        let o = g.matmul(h, v("w2")?)?;
        *slot = g.add_row(o, v("b2")?)?;
    }
    Ok((logits[0], logits[1]))
}
