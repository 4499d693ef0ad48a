use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::LAYER_NORM_EPS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitScheme {
    /// Weights `N(0, 2/(fan_in+fan_out))`, zero biases, unit norm gains,
    /// positional rows and class tokens `N(0, 0.02²)`.
    XavierNormal,
}

/// Architecture hyperparameters shared by the CCMT and the baseline fusers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcmtConfig {
    /// Tokens per modality after uniformization, class token included.
    pub k: usize,
    pub d: usize,
    pub d_h: usize,
    pub heads: usize,
    pub d_mlp: usize,
    /// Blocks per cascade stage.
    pub depth: usize,
    pub eps: f64,
    /// Conventional post-norm residuals instead of `Y + Norm(Y)`.
    pub standard_residual: bool,
    /// Reserved; must stay 0.
    pub dropout: f64,
    pub init: InitScheme,
    pub seed: u64,
}

impl CcmtConfig {
    /// Defaults for token width `d`: `k = 100`, one head of width `d`, `d_mlp = 4d`, depth 1.
    pub fn with_dim(d: usize) -> Self {
        Self {
            k: 100,
            d,
            d_h: d,
            heads: 1,
            d_mlp: 4 * d,
            depth: 1,
            eps: LAYER_NORM_EPS,
            standard_residual: false,
            dropout: 0.0,
            init: InitScheme::XavierNormal,
            seed: 0,
        }
    }

    /// The gradient-check configuration: `k = 4, d = 8, d_h = 8`, one head.
    pub fn tiny() -> Self {
        Self {
            k: 4,
            d_mlp: 16,
            ..Self::with_dim(8)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.k < 2 {
            return fail(format!(
                "k = {} must be at least 2 (class token plus one token)",
                self.k
            ));
        }
        if self.d == 0 || self.d_h == 0 || self.heads == 0 || self.d_mlp == 0 || self.depth == 0 {
            return fail("d, d_h, heads, d_mlp and depth must all be positive".into());
        }
        if !(self.eps > 0.0) {
            return fail(format!("layer-norm eps {} must be positive", self.eps));
        }
        if self.dropout != 0.0 {
            return fail("dropout is not supported; set it to 0".into());
        }
        Ok(())
    }
}

impl Default for CcmtConfig {
    fn default() -> Self {
        Self::with_dim(32)
    }
}
