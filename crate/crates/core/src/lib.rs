//! Split-and-recombine networks for lifting 2D human keypoints to 3D.
//!
//! The crate is organized bottom-up:
//!
//! * [`numerics`]: tensors and reverse-mode differentiation.
//! * [`layers`]: dense, group, split-and-recombine and temporal layers.
//! * [`models`]: whole lifting networks, parameter counting, checkpoints.
//! * [`data`]: skeletons, dataset files, normalization, flips, synthesis.
//! * [`protocols`]: error metrics, pose rareness and evaluation splits.
//! * [`training`]: loss, optimizer, schedule, training and evaluation loops.

pub mod data;
pub mod error;
pub mod layers;
pub mod models;
pub mod numerics;
pub mod protocols;
pub mod training;

pub use error::{Error, Result};
pub use numerics::{Tape, Tensor, Var};
