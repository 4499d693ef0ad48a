//! Cascaded cross-modal transformer (CCMT) fusion for dual binary
//! classification over French text, English text and audio token sets.
//!
//! Crate layout:
//! - [`numerics`]: tensors, a reverse-mode tape and finite-difference checks
//! - [`tokenstore`]: token sets, uniformization, embedding files, manifests
//! - [`synthgen`]: seeded three-modality benchmark with planted signal
//! - [`ccmt`]: the cascaded model and its checkpoint format
//! - [`baselines`]: voting, MLP and self-attention fusers, unimodal models
//! - [`trainer`]: loss, Adam, training loop, UAR metrics

// Negated comparisons in validation also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod ccmt;
pub mod error;
pub mod numerics;
pub mod synthgen;
pub mod tokenstore;
pub mod trainer;

pub use error::{Error, Result};
