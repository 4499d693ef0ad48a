//! Comparison fusers: plurality voting over unimodal classifiers, MLP fusion
//! of pooled vectors and a self-attention transformer over concatenated tokens,
//! plus the dispatch that puts them and the CCMT behind one interface.

mod fuser;
mod mlp;
mod transformer;
mod voting;

pub use fuser::{Fuser, FuserKind, FuserSpec};
pub use mlp::{init_mlp, mlp_forward, mlp_fusion_forward, unimodal_forward};
pub use transformer::transformer_fusion_forward;
pub use voting::plurality_vote;
