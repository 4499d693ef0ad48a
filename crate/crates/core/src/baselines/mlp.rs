use crate::ccmt::Initializer;
use crate::error::{Error, Result};
use crate::numerics::{Bound, Graph, Real, Var};

/// Two-layer MLP `fan_in -> hidden -> 2` under `prefix`.
pub fn init_mlp(
    init: &mut Initializer<'_>,
    prefix: &str,
    fan_in: usize,
    hidden: usize,
) -> Result<()> {
    init.weight(&format!("{prefix}.w1"), fan_in, hidden)?;
    init.zeros(&format!("{prefix}.b1"), hidden)?;
    init.weight(&format!("{prefix}.w2"), hidden, 2)?;
    init.zeros(&format!("{prefix}.b2"), 2)?;
    Ok(())
}

/// `x (1 x fan_in)` through the MLP, split into `(request, complaint)` logits.
pub fn mlp_forward<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound<'_>,
    prefix: &str,
    x: Var,
) -> Result<(Var, Var)> {
    let v = |s: &str| bound.var(&format!("{prefix}.{s}"));
    let w1 = v("w1")?;
    let fan_in = g.value(w1).rows();
    let got = g.value(x).cols();
    if fan_in != got {
        return Err(Error::Contract(format!(
            "{prefix} expects {fan_in} input features, got {got}"
        )));
    }
    let h = g.matmul(x, w1)?;
    let h = g.add_row(h, v("b1")?)?;
    let h = g.gelu(h);
    let o = g.matmul(h, v("w2")?)?;
    let o = g.add_row(o, v("b2")?)?;
    Ok((g.col(o, 0)?, g.col(o, 1)?))
}

/// Mean-pool a token matrix, then the MLP.
pub fn unimodal_forward<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound<'_>,
    prefix: &str,
    tokens: Var,
) -> Result<(Var, Var)> {
    let pooled = g.mean_rows(tokens);
    mlp_forward(g, bound, prefix, pooled)
}

/// Concatenate per-modality feature rows, then the MLP.
pub fn mlp_fusion_forward<T: Real>(
    g: &mut Graph<T>,
    bound: &Bound<'_>,
    prefix: &str,
    features: &[Var],
) -> Result<(Var, Var)> {
    let x = if features.len() == 1 {
        features[0]
    } else {
        g.concat_cols(features)?
    };
    mlp_forward(g, bound, prefix, x)
}
