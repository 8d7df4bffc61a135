//! Stroke-conditioned video synthesis with a one-step recurrent predictor.
//!
//! Given one image and a motion stroke (one keypoint per future frame), the
//! model encodes the image (`E1`) and each stroke step (`E2`), advances a
//! spatial latent state with a dense-block predictor that always sees the
//! initial encoding, and decodes every state to a frame (`G`). Two
//! spectrally normalized discriminators judge single frames (conditioned on
//! the motion code) and consecutive frame pairs.
//!
//! The crate is `no_std` (with `alloc`). The default `std` feature only
//! enables runtime CPU feature detection in the matrix kernels.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod data;
pub mod graph;
pub mod init;
mod kernels;
pub mod losses;
pub mod metrics;
pub mod model;
pub mod optim;
pub mod params;
pub mod real;
pub mod spectral;
pub mod strokes;
pub mod tensor;
pub mod training;

pub use graph::{Grads, Graph, Var};
pub use kernels::ConvGeom;
pub use model::{Frame, LatentState, Model, ModelConfig, MotionCode};
pub use params::{Group, ParamId, ParamStore};
pub use real::Real;
pub use spectral::{spectral_normalize, PowerState};
pub use strokes::{Point, StrokeKeypoints, StrokeRaster};
pub use tensor::Tensor;

use alloc::string::String;

/// Errors raised by the core crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// Shapes or settings that do not fit the model configuration.
    #[error("configuration error: {0}")]
    Config(String),
    /// Invalid caller-supplied data.
    #[error("input error: {0}")]
    Input(String),
    /// Malformed serialized data.
    #[error("format error: {0}")]
    Format(String),
    /// A non-finite value appeared during training.
    #[error("training fault: {0}")]
    TrainingFault(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
