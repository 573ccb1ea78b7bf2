use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::ops::{fold_relu_pattern, relu, relu_backward, Linear};
use crate::PfmError;

/// Two-layer ReLU feed-forward block, `relu(x·W1 + b1)·W2 + b2` per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FfnParams {
    pub w1: Matrix,
    pub b1: Vec<f64>,
    pub w2: Matrix,
    pub b2: Vec<f64>,
}

impl FfnParams {
    pub fn zeros(d_in: usize, d_hidden: usize, d_out: usize) -> Self {
        Self {
            w1: Matrix::zeros(d_in, d_hidden),
            b1: vec![0.0; d_hidden],
            w2: Matrix::zeros(d_hidden, d_out),
            b2: vec![0.0; d_out],
        }
    }

    pub fn d_in(&self) -> usize {
        self.w1.rows()
    }

    pub fn d_hidden(&self) -> usize {
        self.w1.cols()
    }

    pub fn d_out(&self) -> usize {
        self.w2.cols()
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.d_in(), self.d_hidden(), self.d_out())
    }

    pub fn validate(&self) -> Result<(), PfmError> {
        if self.b1.len() != self.d_hidden() || self.w2.rows() != self.d_hidden() || self.b2.len() != self.d_out() {
            return Err(PfmError::Shape(format!(
                "feed-forward shapes {:?}/{} then {:?}/{} do not chain",
                self.w1.shape(),
                self.b1.len(),
                self.w2.shape(),
                self.b2.len()
            )));
        }
        Ok(())
    }

    // both layers go through the `Linear` code path
    fn first(&self) -> Linear {
        Linear::new(self.w1.clone(), Some(self.b1.clone()))
    }

    fn second(&self) -> Linear {
        Linear::new(self.w2.clone(), Some(self.b2.clone()))
    }
}

#[derive(Debug, Clone)]
pub struct FfnCache {
    input: Matrix,
    pre: Matrix,
    hidden: Matrix,
}

impl FfnCache {
    /// ReLU pre-activations, for kink detection.
    pub fn pre_activation(&self) -> &Matrix {
        &self.pre
    }

    pub fn fold_pattern(&self, pattern: u64) -> u64 {
        fold_relu_pattern(pattern, &self.pre)
    }
}

pub fn ffn(m: &Matrix, p: &FfnParams) -> Result<Matrix, PfmError> {
    ffn_forward(m, p).map(|(y, _)| y)
}

pub fn ffn_forward(m: &Matrix, p: &FfnParams) -> Result<(Matrix, FfnCache), PfmError> {
    p.validate()?;
    let pre = p.first().forward(m)?;
    let hidden = relu(&pre);
    let y = p.second().forward(&hidden)?;
    Ok((
        y,
        FfnCache {
            input: m.clone(),
            pre,
            hidden,
        },
    ))
}

/// Returns `(d_input, parameter gradients)`.
pub fn ffn_backward(cache: &FfnCache, p: &FfnParams, dy: &Matrix) -> (Matrix, FfnParams) {
    let (d_hidden, g2) = p.second().backward(&cache.hidden, dy);
    let d_pre = relu_backward(&cache.pre, &d_hidden);
    let (dx, g1) = p.first().backward(&cache.input, &d_pre);
    let grad = FfnParams {
        w1: g1.weight,
        b1: g1.bias.unwrap_or_default(),
        w2: g2.weight,
        b2: g2.bias.unwrap_or_default(),
    };
    (dx, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_weights_give_output_bias() {
        let mut p = FfnParams::zeros(3, 5, 2);
        p.b2 = vec![1.5, -0.5];
        let y = ffn(&Matrix::from_fn(4, 3, |r, c| (r * c) as f64), &p).unwrap();
        for r in 0..4 {
            assert_eq!(y.row(r), &[1.5, -0.5]);
        }
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let mut p = FfnParams::zeros(3, 5, 2);
        p.b1.pop();
        assert!(ffn(&Matrix::zeros(1, 3), &p).is_err());
        let p = FfnParams::zeros(3, 5, 2);
        assert!(ffn(&Matrix::zeros(1, 4), &p).is_err());
    }
}
