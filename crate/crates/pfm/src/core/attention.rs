use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::ops::{softmax_rows, softmax_rows_backward, Linear};
use crate::PfmError;

/// Multi-head cross-attention with a single output projection applied after
/// the heads are concatenated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionParams {
    pub n_heads: usize,
    pub query: Linear,
    pub key: Linear,
    pub value: Linear,
    pub output: Linear,
}

impl AttentionParams {
    pub fn zeros(d: usize, n_heads: usize, with_bias: bool) -> Self {
        let lin = || Linear::new(Matrix::zeros(d, d), with_bias.then(|| vec![0.0; d]));
        Self {
            n_heads,
            query: lin(),
            key: lin(),
            value: lin(),
            output: lin(),
        }
    }

    pub fn d(&self) -> usize {
        self.query.d_in()
    }

    pub fn head_dim(&self) -> usize {
        self.d() / self.n_heads
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            n_heads: self.n_heads,
            query: self.query.zeros_like(),
            key: self.key.zeros_like(),
            value: self.value.zeros_like(),
            output: self.output.zeros_like(),
        }
    }

    pub fn validate(&self) -> Result<(), PfmError> {
        let d = self.d();
        if self.n_heads == 0 || d % self.n_heads != 0 {
            return Err(PfmError::Shape(format!(
                "{d} channels cannot split into {} heads",
                self.n_heads
            )));
        }
        for (name, l) in [
            ("query", &self.query),
            ("key", &self.key),
            ("value", &self.value),
            ("output", &self.output),
        ] {
            if l.weight.shape() != (d, d) || l.bias.as_ref().is_some_and(|b| b.len() != d) {
                return Err(PfmError::Shape(format!("{name} projection is not {d}x{d}")));
            }
        }
        Ok(())
    }
}

/// Intermediates of one attention evaluation.
#[derive(Debug, Clone)]
pub struct AttentionCache {
    q_in: Matrix,
    k_in: Matrix,
    v_in: Matrix,
    q: Matrix,
    k: Matrix,
    v: Matrix,
    /// Attention weights per head, `n_q × n_kv`.
    probs: Vec<Matrix>,
    concat: Matrix,
}

impl AttentionCache {
    pub fn weights(&self) -> &[Matrix] {
        &self.probs
    }
}

/// Gradients of one attention evaluation.
#[derive(Debug, Clone)]
pub struct AttentionGrads {
    pub q_in: Matrix,
    pub k_in: Matrix,
    pub v_in: Matrix,
    pub params: AttentionParams,
}

pub fn multi_head_cross_attention(
    q_in: &Matrix,
    k_in: &Matrix,
    v_in: &Matrix,
    p: &AttentionParams,
) -> Result<Matrix, PfmError> {
    attention_forward(q_in, k_in, v_in, p).map(|(y, _)| y)
}

pub fn attention_forward(
    q_in: &Matrix,
    k_in: &Matrix,
    v_in: &Matrix,
    p: &AttentionParams,
) -> Result<(Matrix, AttentionCache), PfmError> {
    p.validate()?;
    if k_in.rows() != v_in.rows() {
        return Err(PfmError::Shape(format!(
            "{} keys but {} values",
            k_in.rows(),
            v_in.rows()
        )));
    }
    if k_in.rows() == 0 {
        return Err(PfmError::Shape("attention over zero keys".into()));
    }
    let q = p.query.forward(q_in)?;
    let k = p.key.forward(k_in)?;
    let v = p.value.forward(v_in)?;
    let dh = p.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut concat = Matrix::zeros(q.rows(), p.d());
    let mut probs = Vec::with_capacity(p.n_heads);
    for h in 0..p.n_heads {
        let cols = h * dh..(h + 1) * dh;
        let (qh, kh, vh) = (q.columns(cols.clone()), k.columns(cols.clone()), v.columns(cols));
        let weights = softmax_rows(&qh.matmul_t(&kh).scale(scale));
        concat.set_columns(h * dh, &weights.matmul(&vh));
        probs.push(weights);
    }
    let y = p.output.forward(&concat)?;
    let cache = AttentionCache {
        q_in: q_in.clone(),
        k_in: k_in.clone(),
        v_in: v_in.clone(),
        q,
        k,
        v,
        probs,
        concat,
    };
    Ok((y, cache))
}

pub fn attention_backward(cache: &AttentionCache, p: &AttentionParams, d_out: &Matrix) -> AttentionGrads {
    let (d_concat, g_output) = p.output.backward(&cache.concat, d_out);
    let dh = p.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let mut dq = Matrix::zeros(cache.q.rows(), p.d());
    let mut dk = Matrix::zeros(cache.k.rows(), p.d());
    let mut dv = Matrix::zeros(cache.v.rows(), p.d());
    for (h, weights) in cache.probs.iter().enumerate() {
        let cols = h * dh..(h + 1) * dh;
        let (qh, kh, vh) = (
            cache.q.columns(cols.clone()),
            cache.k.columns(cols.clone()),
            cache.v.columns(cols.clone()),
        );
        let d_head = d_concat.columns(cols);
        let d_weights = d_head.matmul_t(&vh);
        dv.set_columns(h * dh, &weights.t_matmul(&d_head));
        let d_scores = softmax_rows_backward(weights, &d_weights).scale(scale);
        dq.set_columns(h * dh, &d_scores.matmul(&kh));
        dk.set_columns(h * dh, &d_scores.t_matmul(&qh));
    }
    let (dq_in, g_query) = p.query.backward(&cache.q_in, &dq);
    let (dk_in, g_key) = p.key.backward(&cache.k_in, &dk);
    let (dv_in, g_value) = p.value.backward(&cache.v_in, &dv);
    AttentionGrads {
        q_in: dq_in,
        k_in: dk_in,
        v_in: dv_in,
        params: AttentionParams {
            n_heads: p.n_heads,
            query: g_query,
            key: g_key,
            value: g_value,
            output: g_output,
        },
    }
}
