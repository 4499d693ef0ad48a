use super::{CcmtConfig, Initializer};
use crate::error::Result;
use crate::numerics::{Bound, Graph, Real, Var};

/// Parameter names of one cross-attention block under `prefix`.
pub fn init_block(init: &mut Initializer<'_>, prefix: &str, cfg: &CcmtConfig) -> Result<()> {
    let (d, dh) = (cfg.d, cfg.d_h);
    for h in 0..cfg.heads {
        init.weight(&format!("{prefix}.wq.{h}"), d, dh)?;
        init.weight(&format!("{prefix}.wk.{h}"), d, dh)?;
        init.weight(&format!("{prefix}.wv.{h}"), d, dh)?;
    }
    init.weight(&format!("{prefix}.m"), cfg.heads * dh, d)?;
    init.ones(&format!("{prefix}.norm1.gain"), d)?;
    init.zeros(&format!("{prefix}.norm1.bias"), d)?;
    init.ones(&format!("{prefix}.norm2.gain"), d)?;
    init.zeros(&format!("{prefix}.norm2.bias"), d)?;
    init.weight(&format!("{prefix}.ff.w1"), d, 4 * d)?;
    init.zeros(&format!("{prefix}.ff.b1"), 4 * d)?;
    init.weight(&format!("{prefix}.ff.w2"), 4 * d, d)?;
    init.zeros(&format!("{prefix}.ff.b2"), d)?;
    Ok(())
}

/// Graph handles of one block's parameters.
#[derive(Debug, Clone)]
pub struct BlockVars {
    pub wq: Vec<Var>,
    pub wk: Vec<Var>,
    pub wv: Vec<Var>,
    pub m: Var,
    pub norm1: (Var, Var),
    pub norm2: (Var, Var),
    pub ff_w1: Var,
    pub ff_b1: Var,
    pub ff_w2: Var,
    pub ff_b2: Var,
}

impl BlockVars {
    pub fn bind(bound: &Bound<'_>, prefix: &str, heads: usize) -> Result<Self> {
        let v = |s: &str| bound.var(&format!("{prefix}.{s}"));
        let per_head =
            |s: &str| -> Result<Vec<Var>> { (0..heads).map(|h| v(&format!("{s}.{h}"))).collect() };
        Ok(Self {
            wq: per_head("wq")?,
            wk: per_head("wk")?,
            wv: per_head("wv")?,
            m: v("m")?,
            norm1: (v("norm1.gain")?, v("norm1.bias")?),
            norm2: (v("norm2.gain")?, v("norm2.bias")?),
            ff_w1: v("ff.w1")?,
            ff_b1: v("ff.b1")?,
            ff_w2: v("ff.w2")?,
            ff_b2: v("ff.b2")?,
        })
    }
}

/// Two affine maps `d -> 4d -> d` with GELU between.
pub fn feed_forward<T: Real>(g: &mut Graph<T>, x: Var, p: &BlockVars) -> Result<Var> {
    let h = g.matmul(x, p.ff_w1)?;
    let h = g.add_row(h, p.ff_b1)?;
    let h = g.gelu(h);
    let o = g.matmul(h, p.ff_w2)?;
    g.add_row(o, p.ff_b2)
}

/// Multi-head cross attention followed by the output re-projection:
/// per head `softmax(q W_Q (k W_K)ᵀ / sqrt(d_h)) · v W_V`, heads concatenated, times `M`.
pub fn attention<T: Real>(
    g: &mut Graph<T>,
    q_src: Var,
    k_src: Var,
    v_src: Var,
    p: &BlockVars,
    d_h: usize,
) -> Result<Var> {
    let scale = T::c(1.0 / (d_h as f64).sqrt());
    let mut heads = Vec::with_capacity(p.wq.len());
    for h in 0..p.wq.len() {
        let q = g.matmul(q_src, p.wq[h])?;
        let k = g.matmul(k_src, p.wk[h])?;
        let v = g.matmul(v_src, p.wv[h])?;
        let scores = g.matmul_nt(q, k)?;
        let scores = g.scale(scores, scale);
        let weights = g.row_softmax(scores);
        heads.push(g.matmul(weights, v)?);
    }
    let u = if heads.len() == 1 {
        heads[0]
    } else {
        g.concat_cols(&heads)?
    };
    g.matmul(u, p.m)
}

/// One cascade block.
///
/// Default form: `Z = Y + Norm(Y)`, `out = Z + FF(Norm(Z))` where `Y` is the
/// attention output; there is no skip connection from the block input.
/// With `standard_residual`: `Z = Norm(q_src + Y)`, `out = Norm(Z + FF(Z))`.
pub fn cross_attention_block<T: Real>(
    g: &mut Graph<T>,
    q_src: Var,
    k_src: Var,
    v_src: Var,
    p: &BlockVars,
    cfg: &CcmtConfig,
) -> Result<Var> {
    let eps = T::c(cfg.eps);
    let y = attention(g, q_src, k_src, v_src, p, cfg.d_h)?;
    if cfg.standard_residual {
        let r = g.add(q_src, y)?;
        let z = g.layer_norm(r, p.norm1.0, p.norm1.1, eps)?;
        let f = feed_forward(g, z, p)?;
        let r = g.add(z, f)?;
        return g.layer_norm(r, p.norm2.0, p.norm2.1, eps);
    }
    let n1 = g.layer_norm(y, p.norm1.0, p.norm1.1, eps)?;
    let z = g.add(y, n1)?;
    let n2 = g.layer_norm(z, p.norm2.0, p.norm2.1, eps)?;
    let f = feed_forward(g, n2, p)?;
    g.add(z, f)
}
