use std::hash::{DefaultHasher, Hasher};

use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use crate::PfmError;

/// Layer-norm variance floor.
pub const LN_EPS: f64 = 1e-5;

/// Affine map `y = x·W + b` applied to every row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Linear {
    /// `d_in × d_out`.
    pub weight: Matrix,
    pub bias: Option<Vec<f64>>,
}

impl Linear {
    pub fn new(weight: Matrix, bias: Option<Vec<f64>>) -> Self {
        Self { weight, bias }
    }

    pub fn d_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn d_out(&self) -> usize {
        self.weight.cols()
    }

    /// Same shapes, all zeros. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        Self {
            weight: Matrix::zeros(self.d_in(), self.d_out()),
            bias: self.bias.as_ref().map(|b| vec![0.0; b.len()]),
        }
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix, PfmError> {
        if x.cols() != self.d_in() {
            return Err(PfmError::Shape(format!(
                "linear expects {} input columns, got {}",
                self.d_in(),
                x.cols()
            )));
        }
        if let Some(b) = &self.bias {
            if b.len() != self.d_out() {
                return Err(PfmError::Shape(format!(
                    "bias length {} for {} outputs",
                    b.len(),
                    self.d_out()
                )));
            }
        }
        let y = x.matmul(&self.weight);
        Ok(match &self.bias {
            Some(b) => y.add_row_vector(b),
            None => y,
        })
    }

    /// Returns `(dx, parameter gradients)`.
    pub fn backward(&self, x: &Matrix, dy: &Matrix) -> (Matrix, Linear) {
        let grad = Linear {
            weight: x.t_matmul(dy),
            bias: self.bias.as_ref().map(|_| dy.column_sums()),
        };
        (dy.matmul_t(&self.weight), grad)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Gradient through [`softmax_rows`] given its output `y`.
pub fn softmax_rows_backward(y: &Matrix, dy: &Matrix) -> Matrix {
    let mut dx = Matrix::zeros(y.rows(), y.cols());
    for r in 0..y.rows() {
        let (yr, dyr) = (y.row(r), dy.row(r));
        let dot: f64 = yr.iter().zip(dyr).map(|(a, b)| a * b).sum();
        for ((o, &p), &g) in dx.row_mut(r).iter_mut().zip(yr).zip(dyr) {
            *o = p * (g - dot);
        }
    }
    dx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerNormParams {
    pub gamma: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LayerNormParams {
    /// γ = 1, β = 0.
    pub fn identity(d: usize) -> Self {
        Self {
            gamma: vec![1.0; d],
            beta: vec![0.0; d],
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            gamma: vec![0.0; d],
            beta: vec![0.0; d],
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }
}

/// Normalized rows and reciprocal standard deviations, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub normalized: Matrix,
    pub inv_std: Vec<f64>,
}

pub fn layer_norm(m: &Matrix, gamma: &[f64], beta: &[f64], eps: f64) -> Result<Matrix, PfmError> {
    layer_norm_forward(m, gamma, beta, eps).map(|(y, _)| y)
}

pub fn layer_norm_forward(
    m: &Matrix,
    gamma: &[f64],
    beta: &[f64],
    eps: f64,
) -> Result<(Matrix, LayerNormCache), PfmError> {
    let d = m.cols();
    if gamma.len() != d || beta.len() != d {
        return Err(PfmError::Shape(format!(
            "layer norm over {d} columns with γ/β of length {}/{}",
            gamma.len(),
            beta.len()
        )));
    }
    let mut normalized = Matrix::zeros(m.rows(), d);
    let mut inv_std = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let row = m.row(r);
        let mean = row.iter().sum::<f64>() / d as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / d as f64;
        let k = 1.0 / (var + eps).sqrt();
        for (o, v) in normalized.row_mut(r).iter_mut().zip(row) {
            *o = (v - mean) * k;
        }
        inv_std.push(k);
    }
    let mut y = normalized.clone();
    for r in 0..y.rows() {
        for ((o, g), b) in y.row_mut(r).iter_mut().zip(gamma).zip(beta) {
            *o = *o * g + b;
        }
    }
    Ok((y, LayerNormCache { normalized, inv_std }))
}

pub fn layer_norm_backward(cache: &LayerNormCache, gamma: &[f64], dy: &Matrix) -> (Matrix, LayerNormParams) {
    let (rows, d) = dy.shape();
    let mut dx = Matrix::zeros(rows, d);
    let mut grad = LayerNormParams::zeros(d);
    for r in 0..rows {
        let (xh, g) = (cache.normalized.row(r), dy.row(r));
        let dxh: Vec<f64> = g.iter().zip(gamma).map(|(a, b)| a * b).collect();
        let mean_dxh = dxh.iter().sum::<f64>() / d as f64;
        let mean_dxh_xh = dxh.iter().zip(xh).map(|(a, b)| a * b).sum::<f64>() / d as f64;
        let k = cache.inv_std[r];
        for (c, o) in dx.row_mut(r).iter_mut().enumerate() {
            *o = k * (dxh[c] - mean_dxh - xh[c] * mean_dxh_xh);
        }
        for c in 0..d {
            grad.gamma[c] += g[c] * xh[c];
            grad.beta[c] += g[c];
        }
    }
    (dx, grad)
}

/// Elementwise ReLU.
pub fn relu(m: &Matrix) -> Matrix {
    m.map(|v| v.max(0.0))
}

/// Gradient through ReLU given the pre-activation.
pub fn relu_backward(pre: &Matrix, dy: &Matrix) -> Matrix {
    pre.zip_map(dy, |p, g| if p > 0.0 { g } else { 0.0 })
}

/// Folds the on/off state of every ReLU unit into `pattern`.
///
/// Two evaluations with equal patterns lie on the same linear piece of every
/// ReLU, which is what makes a central difference meaningful.
pub fn fold_relu_pattern(pattern: u64, pre: &Matrix) -> u64 {
    let mut h = DefaultHasher::new();
    h.write_u64(pattern);
    let mut word = 0u64;
    for (i, &v) in pre.as_slice().iter().enumerate() {
        word = (word << 1) | u64::from(v > 0.0);
        if i % 64 == 63 {
            h.write_u64(word);
            word = 0;
        }
    }
    h.write_u64(word);
    h.write_usize(pre.as_slice().len());
    h.finish()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_examples() {
        let m = Matrix::from_rows(&[vec![3.0; 4], vec![1000.0, 0.0, 0.0, 0.0]]).unwrap();
        let s = softmax_rows(&m);
        assert_eq!(s.row(0), &[0.25; 4]);
        assert_eq!(s[(1, 0)], 1.0);
        assert!(s.is_finite());
    }

    #[test]
    fn layer_norm_constant_row_is_beta() {
        let m = Matrix::from_rows(&[vec![2.0; 5]]).unwrap();
        let beta = vec![0.5; 5];
        let y = layer_norm(&m, &[1.0; 5], &beta, LN_EPS).unwrap();
        assert_eq!(y.row(0), beta.as_slice());
        assert!(layer_norm(&m, &[1.0; 4], &beta, LN_EPS).is_err());
    }

    #[test]
    fn linear_rejects_wrong_width() {
        let l = Linear::new(Matrix::zeros(3, 2), None);
        assert!(l.forward(&Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn pattern_tracks_signs_only() {
        let a = Matrix::from_rows(&[vec![1.0, -2.0, 3.0]]).unwrap();
        let b = Matrix::from_rows(&[vec![5.0, -0.1, 0.2]]).unwrap();
        let c = Matrix::from_rows(&[vec![5.0, 0.1, 0.2]]).unwrap();
        assert_eq!(fold_relu_pattern(0, &a), fold_relu_pattern(0, &b));
        assert_ne!(fold_relu_pattern(0, &a), fold_relu_pattern(0, &c));
    }
}
