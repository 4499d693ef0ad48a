use std::collections::BTreeMap;

use crate::baselines::Fuser;
use crate::ccmt::{has_learned_class_token, ModelInput};
use crate::error::{Error, Result};
use crate::numerics::{grad_check, GradCheckReport, Graph, ParamStore, Tensor};
use crate::tokenstore::Rng;

/// Standard-normal `k x d` tokens per modality; rows of learned class slots are zero.
pub fn random_input(fuser: &Fuser, rng: &mut Rng) -> Result<ModelInput> {
    let (k, d) = (fuser.cfg.k, fuser.cfg.d);
    let mut tokens = BTreeMap::new();
    for &m in fuser.modalities() {
        let mut data: Vec<f32> = (0..k * d).map(|_| rng.normal() as f32).collect();
        if has_learned_class_token(m) {
            data[..d].fill(0.0);
        }
        tokens.insert(m, Tensor::matrix(k, d, data)?);
    }
    Ok(ModelInput { tokens })
}

/// Finite-difference check of the two-task loss of `fuser` on one random
/// input and random labels, in double precision, at the seeded init.
pub fn fuser_grad_check(fuser: &Fuser, seed: u64, eps: f64) -> Result<GradCheckReport> {
    let mut rng = Rng::new(seed);
    let params: ParamStore<f64> = fuser.init_params(&mut rng)?.cast();
    let input = random_input(fuser, &mut rng)?;
    let labels = [rng.bernoulli(0.5), rng.bernoulli(0.5)];
    grad_check(
        |g: &mut Graph<f64>, bound| {
            let mut total = None;
            for (lr, lc) in fuser.forward(g, bound, &input)? {
                for (logit, y) in [lr, lc].into_iter().zip(labels) {
                    let l = g.bce_with_logits(logit, if y { 1.0 } else { 0.0 })?;
                    total = Some(match total {
                        None => l,
                        Some(t) => g.add(t, l)?,
                    });
                }
            }
            total.ok_or_else(|| Error::Contract("fuser produced no outputs".into()))
        },
        &params,
        eps,
    )
}
