//! Dense `f64` tensors, a reverse-mode tape and Adam.

mod adam;
mod dense;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use dense::Tensor;
pub use tape::{Gradients, Tape, Var, LAYER_NORM_EPS, MASKED};
