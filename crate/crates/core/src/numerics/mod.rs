//! Dense tensors, a reverse-mode tape and a finite-difference oracle.
//!
//! All arithmetic is 64-bit. Reductions run in a fixed order and nothing is
//! parallelized, so identical inputs give bit-identical outputs.

mod gradcheck;
mod tape;
mod tensor;

pub use gradcheck::{finite_diff_check, relative_gradient_error};
pub use tape::{BatchStats, Gradients, NormMode, Tape, Var};
pub use tensor::Tensor;

/// Negative slope of the leaky rectifier.
pub const LEAKY_SLOPE: f64 = 0.01;
/// Variance smoothing term of batch normalization.
pub const BN_EPS: f64 = 1e-5;
/// Weight of the newest batch in running batch-norm statistics.
pub const BN_MOMENTUM: f64 = 0.1;
