//! Progressive visible-thermal fusion at desk scale.
//!
//! [`core`] is a small dense kernel over `f64` token matrices: linear maps,
//! softmax, layer normalization, multi-head cross-attention and feed-forward
//! blocks, each with a hand-written backward pass, plus a central-difference
//! gradient checker. [`fusion`] assembles the two-stage fusion module on top
//! of it: heatmap rendering, convolutional token embedding, temporal fusion
//! per modality and bridged multimodal fusion.

pub mod core;
pub mod fusion;

pub use crate::core::{Matrix, TokenMatrix};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum PfmError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("image {height}x{width} is not divisible into {patch}x{patch} patches")]
    Indivisible { height: usize, width: usize, patch: usize },
    #[error("variant mismatch: {0}")]
    Variant(String),
    #[error("non-finite value at {0}")]
    NonFinite(String),
    #[error("parameter document: {0}")]
    Document(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
