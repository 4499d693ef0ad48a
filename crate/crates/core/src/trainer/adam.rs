use super::TrainConfig;
use crate::error::{Error, Result};
use crate::numerics::{ParamStore, Real, Tensor};

/// First and second moment estimates plus the step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub m: Vec<Tensor<T>>,
    pub v: Vec<Tensor<T>>,
    pub t: u64,
}

impl<T: Real> AdamState<T> {
    pub fn new(params: &ParamStore<T>) -> Self {
        let zeros: Vec<Tensor<T>> = params
            .iter()
            .map(|(_, t)| Tensor::zeros(t.shape()))
            .collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }
}

/// One bias-corrected Adam update; weight decay, when set, is decoupled
/// (`θ -= lr·wd·θ` before the moment step).
pub fn adam_step<T: Real>(
    params: &mut ParamStore<T>,
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    cfg: &TrainConfig,
) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        return Err(Error::Contract(format!(
            "adam_step: {} params, {} grads, {} moment slots",
            params.len(),
            grads.len(),
            state.m.len()
        )));
    }
    state.t += 1;
    let (b1, b2) = cfg.betas;
    let bc1 = 1.0 - b1.powi(state.t as i32);
    let bc2 = 1.0 - b2.powi(state.t as i32);
    let (lr, eps, wd) = (T::c(cfg.lr), T::c(cfg.adam_eps), T::c(cfg.weight_decay));
    let (b1t, b2t) = (T::c(b1), T::c(b2));
    let (bc1, bc2) = (T::c(bc1), T::c(bc2));
    let decay = cfg.weight_decay > 0.0;

    for (((theta, g), m), v) in params
        .tensors_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        if theta.numel() != g.numel() {
            return Err(Error::Dimension {
                op: "adam_step",
                left: theta.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
        let (th, gd) = (theta.data_mut(), g.data());
        let (md, vd) = (m.data_mut(), v.data_mut());
        for i in 0..th.len() {
            if decay {
                th[i] = th[i] - lr * wd * th[i];
            }
            md[i] = b1t * md[i] + (T::one() - b1t) * gd[i];
            vd[i] = b2t * vd[i] + (T::one() - b2t) * gd[i] * gd[i];
            let m_hat = md[i] / bc1;
            let v_hat = vd[i] / bc2;
            th[i] = th[i] - lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
