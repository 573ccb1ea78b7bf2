use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::core::{
    attention_backward, attention_forward, ffn_backward, ffn_forward, layer_norm_backward, layer_norm_forward,
    AttentionCache, AttentionParams, FfnCache, FfnParams, LayerNormCache, LayerNormParams, Matrix, LN_EPS,
};
use crate::PfmError;

/// Ablation wiring of the fusion module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Temporal stage, then all four bridge branches.
    Full,
    /// Temporal stage, then the plain sum of the two modalities.
    TffOnly,
    /// Unimodal queries against the fused bridge only; no temporal stage.
    MffUni,
    /// Fused queries against each modality only; no temporal stage.
    MffMul,
    /// All four bridge branches; no temporal stage.
    MffBoth,
}

impl Variant {
    pub const ALL: [Variant; 5] = [
        Variant::Full,
        Variant::TffOnly,
        Variant::MffUni,
        Variant::MffMul,
        Variant::MffBoth,
    ];

    pub fn uses_temporal(self) -> bool {
        matches!(self, Variant::Full | Variant::TffOnly)
    }

    pub fn uses_bridge(self) -> bool {
        self != Variant::TffOnly
    }

    /// Bridge branches in concatenation order.
    pub fn branches(self) -> &'static [Branch] {
        use Branch::*;
        match self {
            Variant::Full | Variant::MffBoth => &[UniV, UniIr, MulV, MulIr],
            Variant::MffUni => &[UniV, UniIr],
            Variant::MffMul => &[MulV, MulIr],
            Variant::TffOnly => &[],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Full => "full",
            Variant::TffOnly => "tff-only",
            Variant::MffUni => "mff-uni",
            Variant::MffMul => "mff-mul",
            Variant::MffBoth => "mff-both",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = PfmError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| PfmError::Variant(format!("unknown variant {s:?}")))
    }
}

/// One cross-attention of the bridge stage, named by its query and key/value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Branch {
    /// visible queries, fused keys/values
    UniV,
    /// infrared queries, fused keys/values
    UniIr,
    /// fused queries, visible keys/values
    MulV,
    /// fused queries, infrared keys/values
    MulIr,
}

impl Branch {
    fn swapped(self) -> Branch {
        match self {
            Branch::UniV => Branch::UniIr,
            Branch::UniIr => Branch::UniV,
            Branch::MulV => Branch::MulIr,
            Branch::MulIr => Branch::MulV,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultimodalParams {
    pub uni_v: Option<AttentionParams>,
    pub uni_ir: Option<AttentionParams>,
    pub mul_v: Option<AttentionParams>,
    pub mul_ir: Option<AttentionParams>,
    /// `(branches·d) → d`.
    pub fuse_ffn: FfnParams,
    pub fuse_ln: LayerNormParams,
}

crate::param_fields!(MultimodalParams {
    uni_v,
    uni_ir,
    mul_v,
    mul_ir,
    fuse_ffn,
    fuse_ln
});

impl MultimodalParams {
    pub fn branch(&self, b: Branch) -> Option<&AttentionParams> {
        match b {
            Branch::UniV => self.uni_v.as_ref(),
            Branch::UniIr => self.uni_ir.as_ref(),
            Branch::MulV => self.mul_v.as_ref(),
            Branch::MulIr => self.mul_ir.as_ref(),
        }
    }

    fn branch_slot(&mut self, b: Branch) -> &mut Option<AttentionParams> {
        match b {
            Branch::UniV => &mut self.uni_v,
            Branch::UniIr => &mut self.uni_ir,
            Branch::MulV => &mut self.mul_v,
            Branch::MulIr => &mut self.mul_ir,
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            uni_v: self.uni_v.as_ref().map(AttentionParams::zeros_like),
            uni_ir: self.uni_ir.as_ref().map(AttentionParams::zeros_like),
            mul_v: self.mul_v.as_ref().map(AttentionParams::zeros_like),
            mul_ir: self.mul_ir.as_ref().map(AttentionParams::zeros_like),
            fuse_ffn: self.fuse_ffn.zeros_like(),
            fuse_ln: LayerNormParams::zeros(self.fuse_ln.dim()),
        }
    }

    /// Checks that exactly the branches of `variant` are present and the
    /// fusing block takes their concatenation.
    pub fn validate(&self, variant: Variant, d: usize) -> Result<(), PfmError> {
        if !variant.uses_bridge() {
            return Err(PfmError::Variant(format!("{variant} has no bridge stage")));
        }
        let used = variant.branches();
        for b in [Branch::UniV, Branch::UniIr, Branch::MulV, Branch::MulIr] {
            match (self.branch(b), used.contains(&b)) {
                (Some(p), true) => {
                    p.validate()?;
                    if p.d() != d {
                        return Err(PfmError::Shape(format!(
                            "{b:?} branch has width {}, expected {d}",
                            p.d()
                        )));
                    }
                }
                (None, false) => {}
                (Some(_), false) => return Err(PfmError::Variant(format!("{variant} does not use the {b:?} branch"))),
                (None, true) => return Err(PfmError::Variant(format!("{variant} needs the {b:?} branch"))),
            }
        }
        if self.fuse_ffn.d_in() != used.len() * d || self.fuse_ffn.d_out() != d {
            return Err(PfmError::Variant(format!(
                "{variant} concatenates {} branches of width {d} but the fusing block maps {} -> {}",
                used.len(),
                self.fuse_ffn.d_in(),
                self.fuse_ffn.d_out()
            )));
        }
        self.fuse_ffn.validate()?;
        if self.fuse_ln.dim() != d || self.fuse_ln.beta.len() != d {
            return Err(PfmError::Shape(format!("fusing layer norm is not {d} wide")));
        }
        Ok(())
    }

    /// Parameters under which exchanging the two modalities leaves the output
    /// unchanged: paired branches trade places and so do the matching row
    /// blocks of the first fusing layer.
    pub fn swap_modalities(&self, variant: Variant) -> Self {
        let mut out = self.clone();
        let d = self.fuse_ffn.d_out();
        let branches = variant.branches();
        for &b in branches {
            *out.branch_slot(b) = self.branch(b.swapped()).cloned();
        }
        for (i, &b) in branches.iter().enumerate() {
            let j = branches.iter().position(|&o| o == b.swapped()).unwrap_or(i);
            for r in 0..d {
                out.fuse_ffn
                    .w1
                    .row_mut(i * d + r)
                    .copy_from_slice(self.fuse_ffn.w1.row(j * d + r));
            }
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct MultimodalCache {
    branches: Vec<(Branch, AttentionCache)>,
    ffn: FfnCache,
    ln: LayerNormCache,
}

impl MultimodalCache {
    pub fn fold_pattern(&self, pattern: u64) -> u64 {
        self.ffn.fold_pattern(pattern)
    }
}

#[derive(Debug, Clone)]
pub struct MultimodalGrads {
    pub xv: Matrix,
    pub xir: Matrix,
    pub params: MultimodalParams,
}

/// `x_f = xv + xir`, the variant's cross-attention branches concatenated,
/// then `LN(FFN(·))`.
pub fn multimodal_fusion(
    xv: &Matrix,
    xir: &Matrix,
    params: &MultimodalParams,
    variant: Variant,
) -> Result<Matrix, PfmError> {
    multimodal_forward(xv, xir, params, variant).map(|(y, _)| y)
}

pub fn multimodal_forward(
    xv: &Matrix,
    xir: &Matrix,
    params: &MultimodalParams,
    variant: Variant,
) -> Result<(Matrix, MultimodalCache), PfmError> {
    if xv.shape() != xir.shape() {
        return Err(PfmError::Shape(format!(
            "visible tokens {:?} and infrared tokens {:?} differ",
            xv.shape(),
            xir.shape()
        )));
    }
    params.validate(variant, xv.cols())?;
    let fused = xv.add(xir);
    let mut outputs = Vec::new();
    let mut caches = Vec::new();
    for &b in variant.branches() {
        let (q, kv) = match b {
            Branch::UniV => (xv, &fused),
            Branch::UniIr => (xir, &fused),
            Branch::MulV => (&fused, xv),
            Branch::MulIr => (&fused, xir),
        };
        let p = params.branch(b).expect("validated");
        let (y, cache) = attention_forward(q, kv, kv, p)?;
        outputs.push(y);
        caches.push((b, cache));
    }
    let cat = Matrix::hcat(&outputs.iter().collect::<Vec<_>>());
    let (f, ffn) = ffn_forward(&cat, &params.fuse_ffn)?;
    let (out, ln) = layer_norm_forward(&f, &params.fuse_ln.gamma, &params.fuse_ln.beta, LN_EPS)?;
    Ok((
        out,
        MultimodalCache {
            branches: caches,
            ffn,
            ln,
        },
    ))
}

pub fn multimodal_backward(cache: &MultimodalCache, params: &MultimodalParams, d_out: &Matrix) -> MultimodalGrads {
    let (d_f, g_ln) = layer_norm_backward(&cache.ln, &params.fuse_ln.gamma, d_out);
    let (d_cat, g_ffn) = ffn_backward(&cache.ffn, &params.fuse_ffn, &d_f);
    let d = d_out.cols();
    let mut grads = params.zeros_like();
    grads.fuse_ffn = g_ffn;
    grads.fuse_ln = g_ln;
    let mut dxv = Matrix::zeros(d_out.rows(), d);
    let mut dxir = Matrix::zeros(d_out.rows(), d);
    let mut dfused = Matrix::zeros(d_out.rows(), d);
    for (i, (b, bc)) in cache.branches.iter().enumerate() {
        let p = params.branch(*b).expect("cached branch has parameters");
        let g = attention_backward(bc, p, &d_cat.columns(i * d..(i + 1) * d));
        let d_kv = g.k_in.add(&g.v_in);
        match b {
            Branch::UniV => {
                dxv.add_assign(&g.q_in);
                dfused.add_assign(&d_kv);
            }
            Branch::UniIr => {
                dxir.add_assign(&g.q_in);
                dfused.add_assign(&d_kv);
            }
            Branch::MulV => {
                dfused.add_assign(&g.q_in);
                dxv.add_assign(&d_kv);
            }
            Branch::MulIr => {
                dfused.add_assign(&g.q_in);
                dxir.add_assign(&d_kv);
            }
        }
        *grads.branch_slot(*b) = Some(g.params);
    }
    dxv.add_assign(&dfused);
    dxir.add_assign(&dfused);
    MultimodalGrads {
        xv: dxv,
        xir: dxir,
        params: grads,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in Variant::ALL {
            assert_eq!(v.name().parse::<Variant>().unwrap(), v);
        }
        assert!("pfm".parse::<Variant>().is_err());
    }

    #[test]
    fn concatenation_widths() {
        assert_eq!(Variant::Full.branches().len(), 4);
        assert_eq!(Variant::MffBoth.branches().len(), 4);
        assert_eq!(Variant::MffUni.branches().len(), 2);
        assert_eq!(Variant::MffMul.branches().len(), 2);
        assert!(!Variant::TffOnly.uses_bridge());
    }
}
