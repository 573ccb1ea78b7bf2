//! Central-difference verification of hand-written backward passes.
//!
//! The scalar loss is the sum of squares of the composite's output, so the
//! upstream gradient handed to `backward` is `2·output`. Every scalar exposed
//! through [`ParamSet`] (parameters and inputs alike) is perturbed by `±h`
//! in place and restored afterwards.

use std::collections::BTreeMap;

use serde::Serialize;

use super::attention::{attention_backward, attention_forward, AttentionCache, AttentionParams};
use super::ffn::{ffn_backward, ffn_forward, FfnCache, FfnParams};
use super::init::{gaussian_matrix, random_attention, random_ffn, random_layer_norm, random_linear, seeded_rng};
use super::matrix::Matrix;
use super::ops::{
    layer_norm_backward, layer_norm_forward, softmax_rows, softmax_rows_backward, LayerNormCache, LayerNormParams,
    Linear, LN_EPS,
};
use super::params::{join_key, ParamSet};
use crate::PfmError;

/// Relative-error denominator floor.
pub const REL_FLOOR: f64 = 1e-8;

/// Worst disagreement between analytic and numeric gradients.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradReport {
    pub max_abs_err: f64,
    pub max_rel_err: f64,
    /// `key[index]` of the scalar with the largest relative error.
    pub worst_param: String,
    pub n_checked: usize,
    /// Scalars whose `±h` probe moved a ReLU unit across its kink.
    pub n_skipped: usize,
}

/// Gradients keyed like [`ParamSet`] blocks.
pub type Gradients = BTreeMap<String, Vec<f64>>;

/// One forward evaluation.
pub struct Evaluation<T> {
    pub output: Matrix,
    /// Hash of every ReLU on/off state touched by the forward pass.
    pub pattern: u64,
    pub tape: T,
}

impl<T> Evaluation<T> {
    pub fn smooth(output: Matrix, tape: T) -> Self {
        Self {
            output,
            pattern: 0,
            tape,
        }
    }
}

/// A composite with an analytic backward pass over its named scalars.
pub trait Differentiable: ParamSet {
    type Tape;

    fn forward(&self) -> Result<Evaluation<Self::Tape>, PfmError>;

    /// Gradient of `Σ d_out ⊙ output` for every block.
    fn backward(&self, eval: &Evaluation<Self::Tape>, d_out: &Matrix) -> Result<Gradients, PfmError>;

    /// Forward pass after only block `changed` moved. Implementations may
    /// reuse parts of `baseline` that do not depend on it.
    fn reforward(&self, baseline: &Evaluation<Self::Tape>, changed: &str) -> Result<Evaluation<Self::Tape>, PfmError> {
        let _ = (baseline, changed);
        self.forward()
    }
}

fn loss(out: &Matrix, what: impl FnOnce() -> String) -> Result<f64, PfmError> {
    let l = out.sum_squares();
    if l.is_finite() {
        Ok(l)
    } else {
        Err(PfmError::NonFinite(what()))
    }
}

/// `Σ p² − Σ m²` summed as `Σ (p − m)(p + m)`, so entries the probe did not
/// touch contribute exactly zero instead of rounding noise.
fn loss_difference(plus: &Matrix, minus: &Matrix) -> f64 {
    plus.as_slice()
        .iter()
        .zip(minus.as_slice())
        .map(|(p, m)| (p - m) * (p + m))
        .sum()
}

fn set_scalar(problem: &mut dyn ParamSet, key: &str, index: usize, value: f64) {
    problem.visit_mut("", &mut |k, _, v| {
        if k == key {
            v[index] = value;
        }
    });
}

/// One probed scalar.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradEntry {
    pub key: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
}

impl GradEntry {
    pub fn abs_err(&self) -> f64 {
        (self.analytic - self.numeric).abs()
    }

    pub fn rel_err(&self) -> f64 {
        self.abs_err() / self.analytic.abs().max(self.numeric.abs()).max(REL_FLOOR)
    }

    pub fn name(&self) -> String {
        format!("{}[{}]", self.key, self.index)
    }
}

fn get_scalar(problem: &dyn ParamSet, key: &str, index: usize) -> Option<f64> {
    let mut found = None;
    problem.visit("", &mut |k, _, v| {
        if k == key {
            found = v.get(index).copied();
        }
    });
    found
}

/// Central difference of the loss `Σ output²` along one scalar, taken around
/// `base` (the forward pass at the current values). `None` when either probe
/// changes the ReLU pattern of `base`.
pub fn central_difference<P: Differentiable>(
    problem: &mut P,
    base: &Evaluation<P::Tape>,
    key: &str,
    index: usize,
    h: f64,
) -> Result<Option<f64>, PfmError> {
    let name = || format!("{key}[{index}]");
    let x = get_scalar(problem, key, index).ok_or_else(|| PfmError::Shape(format!("no scalar {}", name())))?;
    let (up, down) = (x + h, x - h);
    set_scalar(problem, key, index, up);
    let plus = problem.reforward(base, key);
    set_scalar(problem, key, index, down);
    let minus = problem.reforward(base, key);
    set_scalar(problem, key, index, x);
    let (plus, minus) = (plus?, minus?);
    if plus.pattern != base.pattern || minus.pattern != base.pattern {
        return Ok(None);
    }
    loss(&plus.output, name)?;
    loss(&minus.output, name)?;
    Ok(Some(loss_difference(&plus.output, &minus.output) / (up - down)))
}

/// Every comparison made by [`grad_check`], plus the number of kink skips.
pub fn grad_check_entries<P: Differentiable>(problem: &mut P, h: f64) -> Result<(Vec<GradEntry>, usize), PfmError> {
    let base = problem.forward()?;
    loss(&base.output, || "forward output".into())?;
    let grads = problem.backward(&base, &base.output.scale(2.0))?;
    let blocks = problem.flatten("");
    let mut entries = Vec::new();
    let mut skipped = 0;
    for (key, values) in &blocks {
        let analytic = grads
            .get(key)
            .ok_or_else(|| PfmError::Shape(format!("backward produced no gradient for {key}")))?;
        if analytic.len() != values.len() {
            return Err(PfmError::Shape(format!(
                "gradient for {key} has {} entries, expected {}",
                analytic.len(),
                values.len()
            )));
        }
        for (i, &a) in analytic.iter().enumerate() {
            if !a.is_finite() {
                return Err(PfmError::NonFinite(format!("analytic gradient {key}[{i}]")));
            }
            match central_difference(problem, &base, key, i, h)? {
                Some(numeric) => entries.push(GradEntry {
                    key: key.clone(),
                    index: i,
                    analytic: a,
                    numeric,
                }),
                None => skipped += 1,
            }
        }
    }
    Ok((entries, skipped))
}

/// Absolute error a central difference of step `h` can carry from rounding
/// alone when every entry of `output` is off by up to `ulps` units in the
/// last place (taken at magnitude one for entries smaller than that).
///
/// Gradients smaller than this are not resolvable at `h`, whatever the
/// backward pass does.
pub fn rounding_floor(output: &Matrix, h: f64, ulps: f64) -> f64 {
    let spread: f64 = output.as_slice().iter().map(|o| 2.0 * o.abs() * o.abs().max(1.0)).sum();
    ulps * f64::EPSILON * spread / h
}

pub fn grad_check<P: Differentiable>(problem: &mut P, h: f64) -> Result<GradReport, PfmError> {
    let (entries, n_skipped) = grad_check_entries(problem, h)?;
    Ok(summarize(&entries, n_skipped))
}

pub fn summarize(entries: &[GradEntry], n_skipped: usize) -> GradReport {
    let mut report = GradReport {
        max_abs_err: 0.0,
        max_rel_err: 0.0,
        worst_param: String::new(),
        n_checked: entries.len(),
        n_skipped,
    };
    for e in entries {
        report.max_abs_err = report.max_abs_err.max(e.abs_err());
        if e.rel_err() > report.max_rel_err || report.worst_param.is_empty() {
            report.max_rel_err = report.max_rel_err.max(e.rel_err());
            report.worst_param = e.name();
        }
    }
    report
}

/// `x·W + b`.
#[derive(Debug, Clone)]
pub struct LinearProblem {
    pub x: Matrix,
    pub layer: Linear,
}

crate::param_fields!(LinearProblem { x, layer });

impl LinearProblem {
    pub fn random(seed: u64, n_tokens: usize, d_in: usize, d_out: usize) -> Self {
        let mut rng = seeded_rng(seed);
        Self {
            x: gaussian_matrix(&mut rng, n_tokens, d_in, 1.0),
            layer: random_linear(&mut rng, d_in, d_out, true),
        }
    }
}

impl Differentiable for LinearProblem {
    type Tape = ();

    fn forward(&self) -> Result<Evaluation<()>, PfmError> {
        Ok(Evaluation::smooth(self.layer.forward(&self.x)?, ()))
    }

    fn backward(&self, _: &Evaluation<()>, d_out: &Matrix) -> Result<Gradients, PfmError> {
        let (dx, g) = self.layer.backward(&self.x, d_out);
        let mut out = dx.flatten("x");
        out.extend(g.flatten("layer"));
        Ok(out)
    }
}

/// Row softmax of `x`.
#[derive(Debug, Clone)]
pub struct SoftmaxProblem {
    pub x: Matrix,
}

crate::param_fields!(SoftmaxProblem { x });

impl SoftmaxProblem {
    pub fn random(seed: u64, rows: usize, cols: usize) -> Self {
        Self {
            x: gaussian_matrix(&mut seeded_rng(seed), rows, cols, 1.5),
        }
    }
}

impl Differentiable for SoftmaxProblem {
    type Tape = ();

    fn forward(&self) -> Result<Evaluation<()>, PfmError> {
        Ok(Evaluation::smooth(softmax_rows(&self.x), ()))
    }

    fn backward(&self, eval: &Evaluation<()>, d_out: &Matrix) -> Result<Gradients, PfmError> {
        Ok(softmax_rows_backward(&eval.output, d_out).flatten("x"))
    }
}

/// Layer norm of `x` with affine parameters.
#[derive(Debug, Clone)]
pub struct LayerNormProblem {
    pub x: Matrix,
    pub norm: LayerNormParams,
}

crate::param_fields!(LayerNormProblem { x, norm });

impl LayerNormProblem {
    pub fn random(seed: u64, rows: usize, d: usize) -> Self {
        let mut rng = seeded_rng(seed);
        Self {
            x: gaussian_matrix(&mut rng, rows, d, 1.0),
            norm: random_layer_norm(&mut rng, d),
        }
    }
}

impl Differentiable for LayerNormProblem {
    type Tape = LayerNormCache;

    fn forward(&self) -> Result<Evaluation<LayerNormCache>, PfmError> {
        let (y, cache) = layer_norm_forward(&self.x, &self.norm.gamma, &self.norm.beta, LN_EPS)?;
        Ok(Evaluation::smooth(y, cache))
    }

    fn backward(&self, eval: &Evaluation<LayerNormCache>, d_out: &Matrix) -> Result<Gradients, PfmError> {
        let (dx, g) = layer_norm_backward(&eval.tape, &self.norm.gamma, d_out);
        let mut out = dx.flatten("x");
        out.extend(g.flatten("norm"));
        Ok(out)
    }
}

/// Cross-attention with distinct query, key and value inputs.
#[derive(Debug, Clone)]
pub struct AttentionProblem {
    pub q_in: Matrix,
    pub k_in: Matrix,
    pub v_in: Matrix,
    pub attn: AttentionParams,
}

crate::param_fields!(AttentionProblem { q_in, k_in, v_in, attn });

impl AttentionProblem {
    pub fn random(seed: u64, n_q: usize, n_kv: usize, d: usize, n_heads: usize) -> Self {
        let mut rng = seeded_rng(seed);
        Self {
            q_in: gaussian_matrix(&mut rng, n_q, d, 1.0),
            k_in: gaussian_matrix(&mut rng, n_kv, d, 1.0),
            v_in: gaussian_matrix(&mut rng, n_kv, d, 1.0),
            attn: random_attention(&mut rng, d, n_heads, false),
        }
    }
}

impl Differentiable for AttentionProblem {
    type Tape = AttentionCache;

    fn forward(&self) -> Result<Evaluation<AttentionCache>, PfmError> {
        let (y, cache) = attention_forward(&self.q_in, &self.k_in, &self.v_in, &self.attn)?;
        Ok(Evaluation::smooth(y, cache))
    }

    fn backward(&self, eval: &Evaluation<AttentionCache>, d_out: &Matrix) -> Result<Gradients, PfmError> {
        let g = attention_backward(&eval.tape, &self.attn, d_out);
        let mut out = g.q_in.flatten("q_in");
        out.extend(g.k_in.flatten("k_in"));
        out.extend(g.v_in.flatten("v_in"));
        out.extend(g.params.flatten("attn"));
        Ok(out)
    }
}

/// Feed-forward block.
#[derive(Debug, Clone)]
pub struct FfnProblem {
    pub x: Matrix,
    pub ffn: FfnParams,
}

crate::param_fields!(FfnProblem { x, ffn });

impl FfnProblem {
    pub fn random(seed: u64, n_tokens: usize, d_in: usize, d_hidden: usize, d_out: usize) -> Self {
        let mut rng = seeded_rng(seed);
        Self {
            x: gaussian_matrix(&mut rng, n_tokens, d_in, 1.0),
            ffn: random_ffn(&mut rng, d_in, d_hidden, d_out),
        }
    }
}

impl Differentiable for FfnProblem {
    type Tape = FfnCache;

    fn forward(&self) -> Result<Evaluation<FfnCache>, PfmError> {
        let (y, cache) = ffn_forward(&self.x, &self.ffn)?;
        Ok(Evaluation {
            output: y,
            pattern: cache.fold_pattern(0),
            tape: cache,
        })
    }

    fn backward(&self, eval: &Evaluation<FfnCache>, d_out: &Matrix) -> Result<Gradients, PfmError> {
        let (dx, g) = ffn_backward(&eval.tape, &self.ffn, d_out);
        let mut out = dx.flatten("x");
        out.extend(g.flatten("ffn"));
        Ok(out)
    }
}

/// Prefixes every key of `grads` with `prefix`.
pub fn prefixed(prefix: &str, grads: Gradients) -> Gradients {
    grads.into_iter().map(|(k, v)| (join_key(prefix, &k), v)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_exact() {
        // the loss is quadratic in every scalar, so any step is exact up to
        // rounding and a wide one keeps rounding far below the bound
        let mut p = LinearProblem::random(3, 4, 5, 3);
        let r = grad_check(&mut p, 1e-2).unwrap();
        assert_eq!(r.n_checked, 4 * 5 + 5 * 3 + 3);
        assert!(r.max_rel_err <= 1e-10, "{r:?}");
    }

    #[test]
    fn probe_restores_values() {
        let mut p = SoftmaxProblem::random(1, 2, 3);
        let before = p.x.clone();
        grad_check(&mut p, 1e-5).unwrap();
        assert_eq!(p.x, before);
    }

    #[test]
    fn wrong_backward_is_caught() {
        struct Broken {
            x: Matrix,
        }
        crate::param_fields!(Broken { x });
        impl Differentiable for Broken {
            type Tape = ();
            fn forward(&self) -> Result<Evaluation<()>, PfmError> {
                Ok(Evaluation::smooth(self.x.scale(3.0), ()))
            }
            fn backward(&self, _: &Evaluation<()>, d_out: &Matrix) -> Result<Gradients, PfmError> {
                Ok(d_out.scale(2.0).flatten("x"))
            }
        }
        let mut p = Broken {
            x: Matrix::from_rows(&[vec![1.0, -2.0]]).unwrap(),
        };
        let r = grad_check(&mut p, 1e-5).unwrap();
        assert!(r.max_rel_err > 0.3, "{r:?}");
    }

    #[test]
    fn non_finite_is_an_error() {
        let mut p = LinearProblem::random(3, 1, 2, 2);
        p.x[(0, 0)] = f64::NAN;
        assert!(matches!(grad_check(&mut p, 1e-5), Err(PfmError::NonFinite(_))));
    }
}
