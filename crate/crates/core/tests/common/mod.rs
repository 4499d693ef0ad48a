//! Helpers shared by the integration tests, including a plain dense
//! re-implementation of every forward pass used as an oracle.
#![allow(dead_code)]

use std::collections::BTreeMap;

use ccmt_core::baselines::{Fuser, FuserKind, FuserSpec};
use ccmt_core::ccmt::{
    cross_attention_block, init_block, BlockVars, CcmtConfig, Initializer, ModelInput,
};
use ccmt_core::numerics::{Graph, ParamStore, Tensor};
use ccmt_core::tokenstore::{Modality, Rng};
use ccmt_core::trainer::random_input;

pub type Mat = Vec<Vec<f64>>;

pub fn to_mat(t: &Tensor<f64>) -> Mat {
    let cols = *t.shape().last().unwrap_or(&1);
    t.data().chunks(cols).map(<[f64]>::to_vec).collect()
}

fn p(params: &ParamStore<f64>, name: &str) -> Mat {
    to_mat(
        params
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter {name}")),
    )
}

fn vecp(params: &ParamStore<f64>, name: &str) -> Vec<f64> {
    params.get(name).unwrap().data().to_vec()
}

pub fn mm(a: &Mat, b: &Mat) -> Mat {
    assert_eq!(a[0].len(), b.len());
    let mut out = vec![vec![0.0; b[0].len()]; a.len()];
    for i in 0..a.len() {
        for j in 0..b[0].len() {
            let mut s = 0.0;
            for t in 0..b.len() {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn transpose(a: &Mat) -> Mat {
    (0..a[0].len())
        .map(|j| a.iter().map(|r| r[j]).collect())
        .collect()
}

fn add(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.iter().zip(y).map(|(u, v)| u + v).collect())
        .collect()
}

fn add_bias(a: &Mat, b: &[f64]) -> Mat {
    a.iter()
        .map(|r| r.iter().zip(b).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn softmax_rows(a: &Mat) -> Mat {
    a.iter()
        .map(|r| {
            let e: Vec<f64> = r.iter().map(|x| x.exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|x| x / s).collect()
        })
        .collect()
}

pub fn layer_norm(a: &Mat, gain: &[f64], bias: &[f64], eps: f64) -> Mat {
    a.iter()
        .map(|r| {
            let n = r.len() as f64;
            let mean = r.iter().sum::<f64>() / n;
            let var = r.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
            r.iter()
                .enumerate()
                .map(|(i, x)| (x - mean) / (var + eps).sqrt() * gain[i] + bias[i])
                .collect()
        })
        .collect()
}

pub fn gelu(x: f64) -> f64 {
    let c = (2.0 / std::f64::consts::PI).sqrt();
    0.5 * x * (1.0 + (c * (x + 0.044715 * x.powi(3))).tanh())
}

fn gelu_mat(a: &Mat) -> Mat {
    a.iter()
        .map(|r| r.iter().map(|&x| gelu(x)).collect())
        .collect()
}

/// One block, spelled out step by step.
pub fn dense_block(
    q: &Mat,
    k: &Mat,
    v: &Mat,
    params: &ParamStore<f64>,
    prefix: &str,
    cfg: &CcmtConfig,
) -> Mat {
    let mut u: Mat = vec![Vec::new(); q.len()];
    for h in 0..cfg.heads {
        let qh = mm(q, &p(params, &format!("{prefix}.wq.{h}")));
        let kh = mm(k, &p(params, &format!("{prefix}.wk.{h}")));
        let vh = mm(v, &p(params, &format!("{prefix}.wv.{h}")));
        let mut scores = mm(&qh, &transpose(&kh));
        for row in &mut scores {
            for x in row.iter_mut() {
                *x /= (cfg.d_h as f64).sqrt();
            }
        }
        let head = mm(&softmax_rows(&scores), &vh);
        for (dst, src) in u.iter_mut().zip(head) {
            dst.extend(src);
        }
    }
    let y = mm(&u, &p(params, &format!("{prefix}.m")));
    let g1 = vecp(params, &format!("{prefix}.norm1.gain"));
    let b1 = vecp(params, &format!("{prefix}.norm1.bias"));
    let g2 = vecp(params, &format!("{prefix}.norm2.gain"));
    let b2 = vecp(params, &format!("{prefix}.norm2.bias"));
    let ff = |x: &Mat| {
        let h = gelu_mat(&add_bias(
            &mm(x, &p(params, &format!("{prefix}.ff.w1"))),
            &vecp(params, &format!("{prefix}.ff.b1")),
        ));
        add_bias(
            &mm(&h, &p(params, &format!("{prefix}.ff.w2"))),
            &vecp(params, &format!("{prefix}.ff.b2")),
        )
    };
    if cfg.standard_residual {
        let z = layer_norm(&add(q, &y), &g1, &b1, cfg.eps);
        return layer_norm(&add(&z, &ff(&z)), &g2, &b2, cfg.eps);
    }
    let z = add(&y, &layer_norm(&y, &g1, &b1, cfg.eps));
    add(&z, &ff(&layer_norm(&z, &g2, &b2, cfg.eps)))
}

/// Request and complaint heads on one row.
pub fn dense_heads(x: &[f64], params: &ParamStore<f64>) -> (f64, f64) {
    let one = |prefix: &str| {
        let h = gelu_mat(&add_bias(
            &mm(&vec![x.to_vec()], &p(params, &format!("{prefix}.w1"))),
            &vecp(params, &format!("{prefix}.b1")),
        ));
        add_bias(
            &mm(&h, &p(params, &format!("{prefix}.w2"))),
            &vecp(params, &format!("{prefix}.b2")),
        )[0][0]
    };
    (one("head.request"), one("head.complaint"))
}

/// Token matrix of one modality with the learned audio class token swapped in
/// and, when asked, the positional rows added.
pub fn dense_embed(
    input: &ModelInput,
    params: &ParamStore<f64>,
    m: Modality,
    positional: bool,
) -> Mat {
    let raw: Tensor<f64> = input.tokens[&m].cast();
    let mut x = to_mat(&raw);
    if m == Modality::Audio {
        x[0] = vecp(params, "class.audio");
    }
    if positional {
        x = add(&x, &p(params, &format!("pos.{m}")));
    }
    x
}

fn stage(
    params: &ParamStore<f64>,
    cfg: &CcmtConfig,
    name: &str,
    q: Mat,
    kv_keys: &Mat,
    values: &Mat,
) -> Mat {
    let mut x = q;
    for i in 0..cfg.depth {
        x = dense_block(&x, kv_keys, values, params, &format!("{name}.{i}"), cfg);
    }
    x
}

/// The full three-modality cascade.
pub fn dense_ccmt(input: &ModelInput, params: &ParamStore<f64>, cfg: &CcmtConfig) -> (f64, f64) {
    let t_f = dense_embed(input, params, Modality::TextFr, true);
    let t_e = dense_embed(input, params, Modality::TextEn, true);
    let t_a = dense_embed(input, params, Modality::Audio, true);
    let t_c = stage(params, cfg, "stage1", t_e, &t_f, &t_f);
    let t_o = stage(params, cfg, "stage2", t_a.clone(), &t_c, &t_a);
    dense_heads(&t_o[0], params)
}

/// Self-attention fusion over `[cls; sets...]`.
pub fn dense_transformer(
    input: &ModelInput,
    params: &ParamStore<f64>,
    cfg: &CcmtConfig,
    modalities: &[Modality],
) -> (f64, f64) {
    let mut x: Mat = vec![vecp(params, "tf.cls")];
    for &m in modalities {
        x.extend(dense_embed(input, params, m, true));
    }
    for i in 0..cfg.depth {
        let prev = x.clone();
        x = dense_block(&prev, &prev, &prev, params, &format!("tf.block.{i}"), cfg);
    }
    dense_heads(&x[0], params)
}

/// A small random architecture: k in 2..=4, d in 2..=4, one or two heads, depth 1 or 2.
pub fn random_tiny_config(rng: &mut Rng) -> CcmtConfig {
    let d = rng.range_inclusive(2, 4);
    let heads = rng.range_inclusive(1, 2);
    CcmtConfig {
        k: rng.range_inclusive(2, 4),
        d_h: rng.range_inclusive(1, d),
        heads,
        d_mlp: rng.range_inclusive(2, 6),
        depth: rng.range_inclusive(1, 2),
        standard_residual: rng.bernoulli(0.3),
        ..CcmtConfig::with_dim(d)
    }
}

/// Seeded params with every entry jittered so gains, biases and tokens are all generic.
pub fn jittered_params(fuser: &Fuser, rng: &mut Rng, scale: f64) -> ParamStore<f64> {
    let mut params: ParamStore<f64> = fuser.init_params(rng).unwrap().cast();
    for t in params.tensors_mut() {
        t.data_mut()
            .iter_mut()
            .for_each(|x| *x += scale * rng.normal());
    }
    params
}

pub fn random_case(
    kind: FuserKind,
    modalities: &[Modality],
    seed: u64,
) -> (Fuser, ParamStore<f64>, ModelInput) {
    let mut rng = Rng::new(seed);
    let cfg = random_tiny_config(&mut rng);
    let fuser = Fuser::new(FuserSpec::new(kind, modalities), cfg).unwrap();
    let params = jittered_params(&fuser, &mut rng, 0.3);
    let input = random_input(&fuser, &mut rng).unwrap();
    (fuser, params, input)
}

pub fn token_map(input: &ModelInput) -> BTreeMap<Modality, Mat> {
    input
        .tokens
        .iter()
        .map(|(&m, t)| (m, to_mat(&t.cast())))
        .collect()
}

pub fn random_matrix(rng: &mut Rng, rows: usize, cols: usize) -> Tensor<f64> {
    Tensor::matrix(rows, cols, (0..rows * cols).map(|_| rng.normal()).collect()).unwrap()
}

pub fn block_params(cfg: &CcmtConfig, rng: &mut Rng) -> ParamStore<f64> {
    let mut init = Initializer::new(rng);
    init_block(&mut init, "b", cfg).unwrap();
    let mut params: ParamStore<f64> = init.finish().cast();
    for t in params.tensors_mut() {
        t.data_mut()
            .iter_mut()
            .for_each(|x| *x += 0.3 * rng.normal());
    }
    params
}

pub fn graph_block(
    params: &ParamStore<f64>,
    cfg: &CcmtConfig,
    q: &Tensor<f64>,
    k: &Tensor<f64>,
    v: &Tensor<f64>,
) -> Mat {
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let p = BlockVars::bind(&bound, "b", cfg.heads).unwrap();
    let (q, k, v) = (
        g.constant(q.clone()),
        g.constant(k.clone()),
        g.constant(v.clone()),
    );
    let out = cross_attention_block(&mut g, q, k, v, &p, cfg).unwrap();
    to_mat(g.value(out))
}

pub fn max_abs_diff(a: &Mat, b: &Mat) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| {
            assert_eq!(x.len(), y.len());
            x.iter().zip(y).map(|(u, v)| (u - v).abs())
        })
        .fold(0.0, f64::max)
}

pub fn graph_logits(fuser: &Fuser, params: &ParamStore<f64>, input: &ModelInput) -> (f64, f64) {
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let out = fuser.forward(&mut g, &bound, input).unwrap();
    assert_eq!(out.len(), 1);
    (g.value(out[0].0).item(), g.value(out[0].1).item())
}

/// Largest entry difference between the graph block and the dense block on
/// one random instance.
pub fn block_oracle_gap(seed: u64) -> f64 {
    let mut rng = Rng::new(1000 + seed);
    let cfg = random_tiny_config(&mut rng);
    let params = block_params(&cfg, &mut rng);
    let q = random_matrix(&mut rng, cfg.k, cfg.d);
    let k = random_matrix(&mut rng, cfg.k, cfg.d);
    let v = random_matrix(&mut rng, cfg.k, cfg.d);
    let got = graph_block(&params, &cfg, &q, &k, &v);
    let want = dense_block(&to_mat(&q), &to_mat(&k), &to_mat(&v), &params, "b", &cfg);
    max_abs_diff(&got, &want)
}

/// Transformer fusion over a rotating modality subset.
pub fn transformer_oracle_gap(seed: u64) -> f64 {
    let subsets: [&[Modality]; 4] = [
        &[Modality::TextFr, Modality::TextEn, Modality::Audio],
        &[Modality::TextFr, Modality::Audio],
        &[Modality::TextFr, Modality::TextEn],
        &[Modality::Audio],
    ];
    let mods = subsets[seed as usize % subsets.len()];
    let (fuser, params, input) = random_case(FuserKind::Transformer, mods, 2000 + seed);
    let got = graph_logits(&fuser, &params, &input);
    let want = dense_transformer(&input, &params, &fuser.cfg, fuser.modalities());
    (got.0 - want.0).abs().max((got.1 - want.1).abs())
}

pub fn ccmt_oracle_gap(seed: u64) -> f64 {
    let (fuser, params, input) = random_case(FuserKind::Ccmt, &Modality::FUSED, 3000 + seed);
    let got = graph_logits(&fuser, &params, &input);
    let want = dense_ccmt(&input, &params, &fuser.cfg);
    (got.0 - want.0).abs().max((got.1 - want.1).abs())
}
