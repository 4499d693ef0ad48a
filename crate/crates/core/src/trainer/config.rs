use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Optimization settings. Defaults: 30 epochs, lr 1e-4, mini-batches of 32, Adam, k = 100.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub betas: (f64, f64),
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub seed: u64,
    pub k: usize,
    /// Weights of the (request, complaint) losses.
    pub loss_weights: (f64, f64),
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-4,
            epochs: 30,
            batch_size: 32,
            betas: (0.9, 0.999),
            adam_eps: 1e-8,
            weight_decay: 0.0,
            seed: 0,
            k: 100,
            loss_weights: (1.0, 1.0),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.lr > 0.0) || !self.lr.is_finite() {
            return fail(format!("lr {} must be positive", self.lr));
        }
        if self.epochs == 0 {
            return fail("epochs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return fail("batch_size must be at least 1".into());
        }
        if self.k < 2 {
            return fail(format!("k {} must be at least 2", self.k));
        }
        let (b1, b2) = self.betas;
        if !(0.0..1.0).contains(&b1) || !(0.0..1.0).contains(&b2) {
            return fail(format!("betas ({b1}, {b2}) must lie in [0, 1)"));
        }
        if !(self.adam_eps > 0.0) {
            return fail("adam_eps must be positive".into());
        }
        if !(self.weight_decay >= 0.0) {
            return fail("weight_decay must be non-negative".into());
        }
        if !(self.loss_weights.0 >= 0.0 && self.loss_weights.1 >= 0.0) {
            return fail("loss weights must be non-negative".into());
        }
        Ok(())
    }
}
