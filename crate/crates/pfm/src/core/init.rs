//! Seeded random parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use super::attention::AttentionParams;
use super::ffn::FfnParams;
use super::matrix::Matrix;
use super::ops::{LayerNormParams, Linear};

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_vec<R: Rng>(rng: &mut R, n: usize, mean: f64, std: f64) -> Vec<f64> {
    let dist = Normal::new(mean, std).expect("standard deviation must be finite and non-negative");
    (0..n).map(|_| dist.sample(rng)).collect()
}

pub fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, std: f64) -> Matrix {
    let data = (0..rows * cols)
        .map(|_| std * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng))
        .collect();
    Matrix::from_vec(rows, cols, data).expect("length matches shape")
}

/// Fan-in scaled weights; bias drawn only when requested.
pub fn random_linear<R: Rng>(rng: &mut R, d_in: usize, d_out: usize, with_bias: bool) -> Linear {
    let weight = gaussian_matrix(rng, d_in, d_out, 1.0 / (d_in as f64).sqrt());
    let bias = with_bias.then(|| gaussian_vec(rng, d_out, 0.0, 0.1));
    Linear::new(weight, bias)
}

pub fn random_attention<R: Rng>(rng: &mut R, d: usize, n_heads: usize, with_bias: bool) -> AttentionParams {
    AttentionParams {
        n_heads,
        query: random_linear(rng, d, d, with_bias),
        key: random_linear(rng, d, d, with_bias),
        value: random_linear(rng, d, d, with_bias),
        output: random_linear(rng, d, d, with_bias),
    }
}

pub fn random_ffn<R: Rng>(rng: &mut R, d_in: usize, d_hidden: usize, d_out: usize) -> FfnParams {
    let first = random_linear(rng, d_in, d_hidden, true);
    let second = random_linear(rng, d_hidden, d_out, true);
    FfnParams {
        w1: first.weight,
        b1: first.bias.unwrap_or_default(),
        w2: second.weight,
        b2: second.bias.unwrap_or_default(),
    }
}

/// γ near 1 and β near 0, perturbed so the affine part is not the identity.
pub fn random_layer_norm<R: Rng>(rng: &mut R, d: usize) -> LayerNormParams {
    LayerNormParams {
        gamma: gaussian_vec(rng, d, 1.0, 0.1),
        beta: gaussian_vec(rng, d, 0.0, 0.1),
    }
}
