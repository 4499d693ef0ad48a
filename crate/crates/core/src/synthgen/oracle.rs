use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use super::generate::{draw_raw, SignalDirections};
use super::SynthConfig;
use crate::error::{Error, Result};
use crate::tokenstore::{mix64, Modality, Rng, Task};

const ORACLE_SALT: u64 = 0x0AC1_E5A1_7E00_0002;
const RIDGE: f64 = 1.0;
const NEWTON_STEPS: usize = 30;

/// Balanced-class-weight, L2-regularized logistic regression fitted by Newton's method
/// on z-scored features.
struct LinearClassifier {
    mean: Vec<f64>,
    scale: Vec<f64>,
    w: DVector<f64>,
}

impl LinearClassifier {
    fn fit(x: &[Vec<f64>], y: &[bool]) -> Self {
        let n = x.len();
        let p = x[0].len();
        let mut mean = vec![0.0; p];
        for row in x {
            mean.iter_mut()
                .zip(row)
                .for_each(|(m, v)| *m += v / n as f64);
        }
        let mut scale = vec![0.0; p];
        for row in x {
            for j in 0..p {
                scale[j] += (row[j] - mean[j]).powi(2) / n as f64;
            }
        }
        scale.iter_mut().for_each(|s| *s = s.sqrt().max(1e-12));

        let design = DMatrix::from_fn(n, p + 1, |i, j| {
            if j == p {
                1.0
            } else {
                (x[i][j] - mean[j]) / scale[j]
            }
        });
        let n_pos = y.iter().filter(|&&b| b).count().max(1) as f64;
        let n_neg = (n as f64 - n_pos).max(1.0);
        let weight: Vec<f64> = y
            .iter()
            .map(|&b| {
                if b {
                    n as f64 / (2.0 * n_pos)
                } else {
                    n as f64 / (2.0 * n_neg)
                }
            })
            .collect();
        let target = DVector::from_iterator(n, y.iter().map(|&b| f64::from(u8::from(b))));

        let mut w = DVector::zeros(p + 1);
        for _ in 0..NEWTON_STEPS {
            let z = &design * &w;
            let prob = z.map(|v| 1.0 / (1.0 + (-v).exp()));
            let mut grad_coef = DVector::zeros(n);
            let mut curv = DVector::zeros(n);
            for i in 0..n {
                grad_coef[i] = weight[i] * (prob[i] - target[i]);
                curv[i] = weight[i] * prob[i] * (1.0 - prob[i]);
            }
            let mut grad = design.transpose() * grad_coef;
            let weighted = DMatrix::from_fn(n, p + 1, |i, j| design[(i, j)] * curv[i]);
            let mut hess = design.transpose() * weighted;
            for j in 0..p {
                grad[j] += RIDGE * w[j];
                hess[(j, j)] += RIDGE;
            }
            hess[(p, p)] += 1e-9;
            let Some(chol) = hess.cholesky() else { break };
            let step = chol.solve(&grad);
            w -= &step;
            if step.amax() < 1e-10 {
                break;
            }
        }
        Self { mean, scale, w }
    }

    fn predict(&self, x: &[f64]) -> bool {
        let p = self.mean.len();
        let z = (0..p).fold(self.w[p], |z, j| {
            z + self.w[j] * (x[j] - self.mean[j]) / self.scale[j]
        });
        z > 0.0
    }
}

/// UAR of binary predictions; a single-class truth yields that class's recall.
pub(crate) fn uar(truth: &[bool], pred: &[bool]) -> f64 {
    let mut tp = 0usize;
    let mut pos = 0usize;
    let mut tn = 0usize;
    let mut neg = 0usize;
    for (&t, &p) in truth.iter().zip(pred) {
        if t {
            pos += 1;
            tp += usize::from(p);
        } else {
            neg += 1;
            tn += usize::from(!p);
        }
    }
    match (pos, neg) {
        (0, 0) => 0.5,
        (0, _) => tn as f64 / neg as f64,
        (_, 0) => tp as f64 / pos as f64,
        _ => 0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64),
    }
}

/// Dev UAR of a regularized linear classifier on mean-pooled tokens of
/// `modalities` (concatenated), fitted on `n_mc` fresh samples and scored on
/// another `n_mc`. Fresh samples share the dataset's signal directions.
pub fn oracle_uar(
    cfg: &SynthConfig,
    modalities: &[Modality],
    task: Task,
    n_mc: usize,
) -> Result<f64> {
    cfg.validate()?;
    if n_mc < 1000 {
        return Err(Error::Config(format!(
            "oracle needs n_mc >= 1000, got {n_mc}"
        )));
    }
    if modalities.is_empty() {
        return Err(Error::Config("oracle needs at least one modality".into()));
    }
    let dirs = SignalDirections::draw(cfg.seed, cfg.dim);
    let base = mix64(cfg.seed ^ ORACLE_SALT);
    let draws: Vec<(Vec<f64>, bool)> = (0..2 * n_mc)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::new(base ^ i as u64);
            let raw = draw_raw(cfg, &dirs, &mut rng);
            let features = modalities.iter().flat_map(|&m| raw.pooled(m)).collect();
            (features, raw.labels.get(task))
        })
        .collect();
    let (fit, eval) = draws.split_at(n_mc);
    let x: Vec<Vec<f64>> = fit.iter().map(|(f, _)| f.clone()).collect();
    let y: Vec<bool> = fit.iter().map(|(_, l)| *l).collect();
    let clf = LinearClassifier::fit(&x, &y);
    let truth: Vec<bool> = eval.iter().map(|(_, l)| *l).collect();
    let pred: Vec<bool> = eval.iter().map(|(f, _)| clf.predict(f)).collect();
    Ok(uar(&truth, &pred))
}

/// [`oracle_uar`] for a single modality.
pub fn oracle_unimodal_uar(
    cfg: &SynthConfig,
    modality: Modality,
    task: Task,
    n_mc: usize,
) -> Result<f64> {
    oracle_uar(cfg, &[modality], task, n_mc)
}
