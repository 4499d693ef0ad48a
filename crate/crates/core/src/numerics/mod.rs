//! Dense tensors and a reverse-mode tape.
//!
//! Everything in the model zoo is expressed with the op set in [`Graph`]; the
//! raw kernels in [`kernels`] are shared by the forward and backward passes.

mod gradcheck;
mod graph;
pub mod kernels;
mod params;
mod scalar;
mod tensor;

pub use gradcheck::{grad_check, GradCheckReport, ParamCheck};
pub use graph::{Gradients, Graph, Var};
pub use params::{Bound, ParamStore};
pub use scalar::Real;
pub use tensor::Tensor;

/// Default layer-norm epsilon.
pub const LAYER_NORM_EPS: f64 = 1e-5;
