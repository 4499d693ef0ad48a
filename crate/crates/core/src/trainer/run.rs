use std::io::Write;
use std::path::Path;
use std::time::Instant;

use log::{debug, info};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{adam_step, AdamState, Metrics, TrainConfig};
use crate::baselines::Fuser;
use crate::ccmt::prepare_input;
use crate::error::{Error, Result};
use crate::numerics::{kernels, Graph, ParamStore, Tensor};
use crate::tokenstore::{mix64, Rng, SampleRecord, Task};

/// Seed for evaluation-time uniformization; combined with a hash of the sample id.
pub const EVAL_SEED: u64 = 0x5eed_e7a1;

const INIT_SALT: u64 = 0x1a17_0000_0001;
const SHUFFLE_SALT: u64 = 0x5ff1_0000_0002;
const SAMPLE_SALT: u64 = 0x5a3b_0000_0003;

/// Weighted sum of the two tasks' sigmoid cross-entropies, in the stable
/// `max(x,0) - x*y + ln(1 + exp(-|x|))` form.
pub fn bce_loss(logits: (f64, f64), labels: (bool, bool), weights: (f64, f64)) -> f64 {
    let y = |b: bool| if b { 1.0 } else { 0.0 };
    weights.0 * kernels::bce_with_logits(logits.0, y(labels.0))
        + weights.1 * kernels::bce_with_logits(logits.1, y(labels.1))
}

/// FNV-1a over the id bytes.
pub fn id_hash(id: &str) -> u64 {
    id.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

fn label(sample: &SampleRecord, task: Task) -> f32 {
    if sample.labels.get(task) {
        1.0
    } else {
        0.0
    }
}

/// Weighted two-task loss of one sample and its gradient for every parameter, in store order.
pub fn sample_loss_and_grads(
    fuser: &Fuser,
    params: &ParamStore<f32>,
    sample: &SampleRecord,
    rng: &mut Rng,
    weights: (f64, f64),
) -> Result<(f64, Vec<Tensor<f32>>)> {
    let input = prepare_input(sample, fuser.modalities(), fuser.cfg.k, rng)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let outputs = fuser.forward(&mut g, &bound, &input)?;
    let mut total = None;
    for (lr, lc) in outputs {
        let r = g.bce_with_logits(lr, label(sample, Task::Request))?;
        let c = g.bce_with_logits(lc, label(sample, Task::Complaint))?;
        let r = g.scale(r, weights.0 as f32);
        let c = g.scale(c, weights.1 as f32);
        let pair = g.add(r, c)?;
        total = Some(match total {
            None => pair,
            Some(t) => g.add(t, pair)?,
        });
    }
    let loss = total.ok_or_else(|| Error::Contract("fuser produced no outputs".into()))?;
    let value = g.value(loss).item() as f64;
    let grads = g.backward(loss)?;
    Ok((value, bound.collect_grads(&grads)))
}

/// Logit pairs for one sample as f64, one per voter.
pub fn logits(
    fuser: &Fuser,
    params: &ParamStore<f32>,
    sample: &SampleRecord,
    rng: &mut Rng,
) -> Result<Vec<(f64, f64)>> {
    let input = prepare_input(sample, fuser.modalities(), fuser.cfg.k, rng)?;
    let mut g = Graph::new();
    let bound = params.bind(&mut g);
    let outputs = fuser.forward(&mut g, &bound, &input)?;
    Ok(outputs
        .into_iter()
        .map(|(r, c)| (g.value(r).item() as f64, g.value(c).item() as f64))
        .collect())
}

/// UAR per task over `data`. Uniformization is seeded per sample from
/// `eval_seed` and the sample id, so results do not depend on data order.
pub fn evaluate(
    fuser: &Fuser,
    params: &ParamStore<f32>,
    data: &[SampleRecord],
    eval_seed: u64,
) -> Result<Metrics> {
    let preds = data
        .par_iter()
        .map(|s| {
            let mut rng = Rng::new(mix64(eval_seed ^ id_hash(&s.id)));
            let l = logits(fuser, params, s, &mut rng)?;
            let truth = (s.labels.get(Task::Request), s.labels.get(Task::Complaint));
            Ok((Fuser::decide(&l)?, truth))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Metrics::from_predictions(&preds))
}

/// One line of the training history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub dev_uar_request: f64,
    pub dev_uar_complaint: f64,
    pub dev_uar_mean: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the best mean dev UAR (earliest on ties).
    pub params: ParamStore<f32>,
    pub best_epoch: usize,
    pub best_dev: Metrics,
    pub history: Vec<EpochRecord>,
}

struct BestSoFar {
    mean_uar: f64,
    epoch: usize,
    metrics: Metrics,
    params: ParamStore<f32>,
}

fn norms_summary(params: &ParamStore<f32>, grads: Option<&[Tensor<f32>]>) -> String {
    let mut parts: Vec<String> = params
        .iter()
        .enumerate()
        .map(|(i, (name, t))| match grads {
            Some(g) => format!("{name}: |w|={:.3e} |g|={:.3e}", t.norm(), g[i].norm()),
            None => format!("{name}: |w|={:.3e}", t.norm()),
        })
        .collect();
    parts.truncate(64);
    parts.join(", ")
}

/// Mini-batch Adam on the summed two-task loss.
///
/// Each epoch reshuffles the training order and redraws every sample's
/// uniformization; per-sample gradients are computed in parallel and summed in
/// batch order, so the result is independent of the thread count.
pub fn train(
    fuser: &Fuser,
    train_set: &[SampleRecord],
    dev_set: &[SampleRecord],
    cfg: &TrainConfig,
) -> Result<TrainOutcome> {
    cfg.validate()?;
    if cfg.k != fuser.cfg.k {
        return Err(Error::Config(format!(
            "training k {} differs from model k {}",
            cfg.k, fuser.cfg.k
        )));
    }
    if train_set.is_empty() || dev_set.is_empty() {
        return Err(Error::Config(format!(
            "train and dev splits must be nonempty (got {} and {})",
            train_set.len(),
            dev_set.len()
        )));
    }
    let mut params = fuser.init_params(&mut Rng::new(mix64(cfg.seed ^ INIT_SALT)))?;
    let mut adam = AdamState::new(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<BestSoFar> = None;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        let epoch_key = mix64(cfg.seed ^ SAMPLE_SALT ^ (epoch as u64).wrapping_mul(0x9e37_79b9));
        Rng::new(mix64(cfg.seed ^ SHUFFLE_SALT ^ epoch as u64)).shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
            let results = batch
                .par_iter()
                .map(|&i| {
                    let s = &train_set[i];
                    let mut rng = Rng::new(mix64(epoch_key ^ id_hash(&s.id)));
                    sample_loss_and_grads(fuser, &params, s, &mut rng, cfg.loss_weights)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut grads: Vec<Tensor<f32>> = params
                .iter()
                .map(|(_, t)| Tensor::zeros(t.shape()))
                .collect();
            let mut batch_loss = 0.0;
            for (loss, g) in &results {
                batch_loss += loss;
                for (acc, gi) in grads.iter_mut().zip(g) {
                    acc.add_assign(gi);
                }
            }
            let scale = 1.0 / batch.len() as f32;
            for acc in &mut grads {
                acc.data_mut().iter_mut().for_each(|x| *x *= scale);
            }
            let mean_loss = batch_loss / batch.len() as f64;
            if !mean_loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteLoss {
                    epoch,
                    batch: b,
                    loss: mean_loss,
                    norms: norms_summary(&params, Some(&grads)),
                });
            }
            loss_sum += batch_loss;
            adam_step(&mut params, &grads, &mut adam, cfg)?;
        }
        if params.iter().any(|(_, t)| !t.is_finite()) {
            return Err(Error::NonFiniteLoss {
                epoch,
                batch: order.len().div_ceil(cfg.batch_size),
                loss: f64::NAN,
                norms: norms_summary(&params, None),
            });
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let dev = evaluate(fuser, &params, dev_set, EVAL_SEED)?;
        let rec = EpochRecord {
            epoch,
            train_loss,
            dev_uar_request: dev.request.uar,
            dev_uar_complaint: dev.complaint.uar,
            dev_uar_mean: dev.mean_uar,
        };
        info!(
            "epoch {epoch}/{}: loss {:.4}, dev uar request {:.4} complaint {:.4} ({:.1}s)",
            cfg.epochs,
            train_loss,
            rec.dev_uar_request,
            rec.dev_uar_complaint,
            started.elapsed().as_secs_f64()
        );
        history.push(rec);
        if best.as_ref().is_none_or(|b| dev.mean_uar > b.mean_uar) {
            debug!("new best dev mean uar {:.4} at epoch {epoch}", dev.mean_uar);
            best = Some(BestSoFar {
                mean_uar: dev.mean_uar,
                epoch,
                metrics: dev,
                params: params.clone(),
            });
        }
    }
    let best = best.expect("at least one epoch ran");
    Ok(TrainOutcome {
        params: best.params,
        best_epoch: best.epoch,
        best_dev: best.metrics,
        history,
    })
}

/// History as JSON lines, one per epoch.
pub fn write_history(path: impl AsRef<Path>, history: &[EpochRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for rec in history {
        serde_json::to_writer(&mut out, rec)?;
        out.push(b'\n');
    }
    std::fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bce_reference_values() {
        let ln2 = std::f64::consts::LN_2;
        for labels in [(false, false), (true, false), (true, true)] {
            assert!((bce_loss((0.0, 0.0), labels, (1.0, 1.0)) - 2.0 * ln2).abs() < 1e-12);
        }
        assert!(bce_loss((20.0, 20.0), (true, true), (1.0, 1.0)) < 1e-8);
        let l = bce_loss((1.0, 0.0), (false, true), (1.0, 0.0));
        assert!((l - 1.313_261_687_518_223).abs() < 1e-9);
        assert!((bce_loss((1.0, 1.0), (false, false), (0.5, 2.0)) - 2.5 * l).abs() < 1e-12);
        assert!(bce_loss((-1e4, 1e4), (true, false), (1.0, 1.0)).is_finite());
    }

    #[test]
    fn id_hash_is_fnv1a() {
        assert_eq!(id_hash(""), 0xcbf2_9ce4_8422_2325);
        assert_eq!(id_hash("a"), 0xaf63_dc4c_8601_ec8c);
    }
}
