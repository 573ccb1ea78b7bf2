//! Dense 64-bit kernel: token matrices, the layers the fusion module is
//! built from, their backward passes and a finite-difference checker.

mod attention;
mod ffn;
mod gradcheck;
mod init;
mod matrix;
mod ops;
mod params;

pub use attention::{
    attention_backward, attention_forward, multi_head_cross_attention, AttentionCache, AttentionGrads, AttentionParams,
};
pub use ffn::{ffn, ffn_backward, ffn_forward, FfnCache, FfnParams};
pub use gradcheck::{
    central_difference, grad_check, grad_check_entries, prefixed, rounding_floor, summarize, AttentionProblem,
    Differentiable, Evaluation, FfnProblem, GradEntry, GradReport, Gradients, LayerNormProblem, LinearProblem,
    SoftmaxProblem, REL_FLOOR,
};
pub use init::{
    gaussian_matrix, gaussian_vec, random_attention, random_ffn, random_layer_norm, random_linear, seeded_rng,
};
pub use matrix::{Matrix, TokenMatrix};
pub use ops::{
    fold_relu_pattern, layer_norm, layer_norm_backward, layer_norm_forward, relu, relu_backward, softmax_rows,
    softmax_rows_backward, LayerNormCache, LayerNormParams, Linear, LN_EPS,
};
pub use params::{fill_from_tensors, join_key, to_tensors, ParamSet, Tensor};
