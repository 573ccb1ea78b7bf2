//! Named parameter traversal and the flat key → array document.
//!
//! Every parameter struct exposes its scalars as named, row-major blocks.
//! Keys are dotted paths (`temporal_v.attn.query.weight`); the order of
//! traversal is fixed and is the order used for serialization, random
//! initialization and gradient checking.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::attention::AttentionParams;
use super::ffn::FfnParams;
use super::matrix::Matrix;
use super::ops::{LayerNormParams, Linear};
use crate::PfmError;

/// Visitor over named blocks of scalars.
pub trait ParamSet {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64]));
    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64]));

    fn n_scalars(&self) -> usize {
        let mut n = 0;
        self.visit("", &mut |_, _, v| n += v.len());
        n
    }

    /// Key → values map of every block.
    fn flatten(&self, prefix: &str) -> BTreeMap<String, Vec<f64>> {
        let mut out = BTreeMap::new();
        self.visit(prefix, &mut |k, _, v| {
            out.insert(k.to_string(), v.to_vec());
        });
        out
    }

    /// Keys in traversal order.
    fn keys(&self, prefix: &str) -> Vec<String> {
        let mut out = Vec::new();
        self.visit(prefix, &mut |k, _, _| out.push(k.to_string()));
        out
    }
}

pub fn join_key(prefix: &str, name: &str) -> String {
    if prefix.is_empty() {
        name.to_string()
    } else {
        format!("{prefix}.{name}")
    }
}

impl ParamSet for Matrix {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f(prefix, &[self.rows(), self.cols()], self.as_slice());
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        let shape = [self.rows(), self.cols()];
        f(prefix, &shape, self.as_mut_slice());
    }
}

impl ParamSet for Vec<f64> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f(prefix, &[self.len()], self);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        let shape = [self.len()];
        f(prefix, &shape, self);
    }
}

impl<T: ParamSet> ParamSet for Option<T> {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        if let Some(inner) = self {
            inner.visit(prefix, f);
        }
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        if let Some(inner) = self {
            inner.visit_mut(prefix, f);
        }
    }
}

/// Implements [`ParamSet`] by visiting the listed fields in order.
#[macro_export]
macro_rules! param_fields {
    ($ty:ty { $($field:ident),* $(,)? }) => {
        impl $crate::core::ParamSet for $ty {
            fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
                $( $crate::core::ParamSet::visit(&self.$field, &$crate::core::join_key(prefix, stringify!($field)), f); )*
            }

            fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
                $( $crate::core::ParamSet::visit_mut(&mut self.$field, &$crate::core::join_key(prefix, stringify!($field)), f); )*
            }
        }
    };
}

param_fields!(Linear { weight, bias });
param_fields!(LayerNormParams { gamma, beta });
param_fields!(FfnParams { w1, b1, w2, b2 });
param_fields!(AttentionParams {
    query,
    key,
    value,
    output
});

/// One block in a parameter document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    /// Row-major values.
    pub data: Vec<f64>,
}

/// Flat key → array view of a parameter set.
pub fn to_tensors(params: &dyn ParamSet) -> BTreeMap<String, Tensor> {
    let mut out = BTreeMap::new();
    params.visit("", &mut |k, shape, v| {
        out.insert(
            k.to_string(),
            Tensor {
                shape: shape.to_vec(),
                data: v.to_vec(),
            },
        );
    });
    out
}

/// Overwrites every block of `params` from `tensors`.
///
/// Shapes must match exactly and the key sets must be equal.
pub fn fill_from_tensors(params: &mut dyn ParamSet, tensors: &BTreeMap<String, Tensor>) -> Result<(), PfmError> {
    let mut seen = 0usize;
    let mut problem: Option<String> = None;
    params.visit_mut("", &mut |k, shape, v| {
        if problem.is_some() {
            return;
        }
        match tensors.get(k) {
            None => problem = Some(format!("missing tensor {k}")),
            Some(t) if t.shape != shape || t.data.len() != v.len() => {
                problem = Some(format!("tensor {k} has shape {:?}, expected {shape:?}", t.shape));
            }
            Some(t) if t.data.iter().any(|x| !x.is_finite()) => {
                problem = Some(format!("tensor {k} holds non-finite values"));
            }
            Some(t) => {
                v.copy_from_slice(&t.data);
                seen += 1;
            }
        }
    });
    if let Some(p) = problem {
        return Err(PfmError::Document(p));
    }
    if seen != tensors.len() {
        let expected = params.keys("");
        let extra: Vec<&String> = tensors.keys().filter(|k| !expected.contains(k)).collect();
        return Err(PfmError::Document(format!("unexpected tensors {extra:?}")));
    }
    Ok(())
}
