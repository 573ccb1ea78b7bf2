use serde::{Deserialize, Serialize};

use crate::core::{
    attention_backward, attention_forward, ffn_backward, ffn_forward, layer_norm_backward, layer_norm_forward,
    AttentionCache, AttentionParams, FfnCache, FfnParams, LayerNormCache, LayerNormParams, Matrix, LN_EPS,
};
use crate::PfmError;

/// One modality's temporal stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalParams {
    pub attn: AttentionParams,
    pub ln1: LayerNormParams,
    pub ffn: FfnParams,
    pub ln2: LayerNormParams,
}

crate::param_fields!(TemporalParams { attn, ln1, ffn, ln2 });

impl TemporalParams {
    pub fn zeros_like(&self) -> Self {
        Self {
            attn: self.attn.zeros_like(),
            ln1: LayerNormParams::zeros(self.ln1.dim()),
            ffn: self.ffn.zeros_like(),
            ln2: LayerNormParams::zeros(self.ln2.dim()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TemporalCache {
    attn: AttentionCache,
    ln1: LayerNormCache,
    ffn: FfnCache,
    ln2: LayerNormCache,
}

impl TemporalCache {
    pub fn fold_pattern(&self, pattern: u64) -> u64 {
        self.ffn.fold_pattern(pattern)
    }
}

/// Gradients of one temporal stage.
#[derive(Debug, Clone)]
pub struct TemporalGrads {
    pub x_t: Matrix,
    pub x_prev: Matrix,
    pub x_hm: Matrix,
    pub params: TemporalParams,
}

/// `a = CA(x_t + p, x_prev + p, x_prev)`, `x̄ = LN(x_t + a) + x_hm`,
/// output `LN(x̄ + FFN(x̄))`.
pub fn temporal_fusion(
    x_t: &Matrix,
    x_prev: &Matrix,
    x_hm: &Matrix,
    pos: &Matrix,
    params: &TemporalParams,
) -> Result<Matrix, PfmError> {
    temporal_forward(x_t, x_prev, x_hm, pos, params).map(|(y, _)| y)
}

pub fn temporal_forward(
    x_t: &Matrix,
    x_prev: &Matrix,
    x_hm: &Matrix,
    pos: &Matrix,
    params: &TemporalParams,
) -> Result<(Matrix, TemporalCache), PfmError> {
    let shape = x_t.shape();
    for (name, m) in [
        ("previous frame", x_prev),
        ("heatmap", x_hm),
        ("position encoding", pos),
    ] {
        if m.shape() != shape {
            return Err(PfmError::Shape(format!(
                "{name} tokens {:?} differ from current tokens {shape:?}",
                m.shape()
            )));
        }
    }
    let (a, attn) = attention_forward(&x_t.add(pos), &x_prev.add(pos), x_prev, &params.attn)?;
    let (normed, ln1) = layer_norm_forward(&x_t.add(&a), &params.ln1.gamma, &params.ln1.beta, LN_EPS)?;
    let x_bar = normed.add(x_hm);
    let (f, ffn) = ffn_forward(&x_bar, &params.ffn)?;
    let (out, ln2) = layer_norm_forward(&x_bar.add(&f), &params.ln2.gamma, &params.ln2.beta, LN_EPS)?;
    Ok((out, TemporalCache { attn, ln1, ffn, ln2 }))
}

pub fn temporal_backward(cache: &TemporalCache, params: &TemporalParams, d_out: &Matrix) -> TemporalGrads {
    let (d_sum2, g_ln2) = layer_norm_backward(&cache.ln2, &params.ln2.gamma, d_out);
    let (d_ffn_in, g_ffn) = ffn_backward(&cache.ffn, &params.ffn, &d_sum2);
    let d_bar = d_sum2.add(&d_ffn_in);
    let (d_sum1, g_ln1) = layer_norm_backward(&cache.ln1, &params.ln1.gamma, &d_bar);
    let g_attn = attention_backward(&cache.attn, &params.attn, &d_sum1);
    TemporalGrads {
        x_t: d_sum1.add(&g_attn.q_in),
        x_prev: g_attn.k_in.add(&g_attn.v_in),
        x_hm: d_bar,
        params: TemporalParams {
            attn: g_attn.params,
            ln1: g_ln1,
            ffn: g_ffn,
            ln2: g_ln2,
        },
    }
}
