//! rtcnn: a from-scratch real-time CNN engine.
//!
//! The crate provides two parameter-frugal fully-convolutional architectures
//! (a 9-layer sequential fully-CNN and the residual/separable mini-Xception),
//! ADAM training, guided back-propagation saliency reconstruction, and a
//! stacked gender+emotion inference pipeline.
//!
//! Everything runs on plain CPU tensors. Kernels are generic over the element
//! type: `f32` is the working precision for training and inference, `f64`
//! exists for finite-difference gradient verification.

pub mod data;
pub mod error;
pub mod gbp;
pub mod graph;
pub mod layers;
pub mod pipeline;
pub mod rng;
pub mod tensor;
pub mod train;
pub mod weights;

pub use error::{Error, Result};
// graph re-exports added once the module lands
pub use tensor::{Element, Shape, Tensor};
