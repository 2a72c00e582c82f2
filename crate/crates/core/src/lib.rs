//! Siamese tracking and segmentation core.
//!
//! Everything in this crate is pure computation over in-memory values and builds
//! without `std` (an allocator is required). File formats, dataset layout and the
//! command-line front end live in the `masktrack` crate.
//!
//! Layout:
//! - [`geom`]: masks, boxes, IoU, box generation from masks, assignment.
//! - [`autograd`] / [`tensor`]: the small reverse-mode array engine the network runs on.
//! - [`model`]: backbone, adjust layers, depth-wise correlation, heads, refinement.
//! - [`train`]: crops, anchors, labels, losses, optimiser loop.
//! - [`track`]: single-object online tracker.
//! - [`mot`]: cascaded multi-object tracking with mask association.
//! - [`eval`]: J/F statistics, success rates, reset protocol, representation oracles.
//! - [`synth`]: deterministic synthetic scenes with exact ground truth.
#![no_std]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

pub mod autograd;
pub mod data;
pub mod error;
pub mod eval;
pub mod geom;
pub mod image;
pub mod model;
pub mod mot;
pub mod scalar;
pub mod synth;
pub mod tensor;
pub mod track;
pub mod train;

pub use error::{Error, Result};
pub use scalar::Scalar;
pub use tensor::Tensor;
