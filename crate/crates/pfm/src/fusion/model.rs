use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::embed::{embed_backward, embed_forward, EmbedCache, EmbedParams, Image, PATCH};
use super::heatmap::{render_heatmap_with, HeatMap, ObjectCenter, SplatRule};
use super::multimodal::{multimodal_backward, multimodal_forward, MultimodalCache, MultimodalParams, Variant};
use super::posenc::positional_encoding;
use super::temporal::{temporal_backward, temporal_forward, TemporalCache, TemporalParams};
use crate::core::{
    fill_from_tensors, gaussian_matrix, gaussian_vec, prefixed, random_attention, random_ffn, random_layer_norm,
    random_linear, seeded_rng, to_tensors, AttentionParams, Differentiable, Evaluation, FfnParams, Gradients,
    LayerNormParams, Matrix, ParamSet, Tensor,
};
use crate::PfmError;

/// Sizes and wiring of the fusion module.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PfmConfig {
    pub d_model: usize,
    pub n_heads: usize,
    pub ffn_hidden: usize,
    /// Channels of every input frame; visible and infrared share one stem.
    pub image_channels: usize,
    pub stem_channels: usize,
    pub image_height: usize,
    pub image_width: usize,
    pub attention_bias: bool,
    pub variant: Variant,
    pub splat: SplatRule,
}

impl Default for PfmConfig {
    fn default() -> Self {
        Self {
            d_model: 64,
            n_heads: 4,
            ffn_hidden: 128,
            image_channels: 1,
            stem_channels: 4,
            image_height: 32,
            image_width: 32,
            attention_bias: false,
            variant: Variant::Full,
            splat: SplatRule::default(),
        }
    }
}

impl PfmConfig {
    /// The small instance used for gradient verification.
    pub fn toy() -> Self {
        Self {
            d_model: 16,
            ffn_hidden: 32,
            stem_channels: 2,
            ..Self::default()
        }
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn validate(&self) -> Result<(), PfmError> {
        let d = self.d_model;
        if d == 0 || d % 4 != 0 {
            return Err(PfmError::Shape(format!(
                "model width {d} is not a positive multiple of 4"
            )));
        }
        if self.n_heads == 0 || d % self.n_heads != 0 {
            return Err(PfmError::Shape(format!(
                "{d} channels cannot split into {} heads",
                self.n_heads
            )));
        }
        if self.ffn_hidden == 0 || self.image_channels == 0 || self.stem_channels == 0 {
            return Err(PfmError::Shape(
                "hidden width and channel counts must be positive".into(),
            ));
        }
        if self.image_height == 0
            || self.image_width == 0
            || self.image_height % PATCH != 0
            || self.image_width % PATCH != 0
        {
            return Err(PfmError::Indivisible {
                height: self.image_height,
                width: self.image_width,
                patch: PATCH,
            });
        }
        Ok(())
    }
}

/// All trainable blocks of the fusion module.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmParams {
    pub config: PfmConfig,
    /// Shared by the four frames of both modalities.
    pub image_embed: EmbedParams,
    pub heatmap_embed: EmbedParams,
    pub temporal_v: Option<TemporalParams>,
    pub temporal_ir: Option<TemporalParams>,
    pub bridge: Option<MultimodalParams>,
}

crate::param_fields!(PfmParams {
    image_embed,
    heatmap_embed,
    temporal_v,
    temporal_ir,
    bridge
});

/// Serialized form: the configuration plus a flat key → array map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfmDocument {
    pub config: PfmConfig,
    pub tensors: BTreeMap<String, Tensor>,
}

impl PfmParams {
    /// Correctly shaped, all-zero parameters for `config`.
    pub fn zeros(config: &PfmConfig) -> Result<Self, PfmError> {
        config.validate()?;
        let d = config.d_model;
        let attn = || AttentionParams::zeros(d, config.n_heads, config.attention_bias);
        let temporal = || TemporalParams {
            attn: attn(),
            ln1: LayerNormParams::zeros(d),
            ffn: FfnParams::zeros(d, config.ffn_hidden, d),
            ln2: LayerNormParams::zeros(d),
        };
        let variant = config.variant;
        let bridge = variant.uses_bridge().then(|| {
            let used = variant.branches();
            let slot = |b| used.contains(&b).then(attn);
            use super::multimodal::Branch::*;
            MultimodalParams {
                uni_v: slot(UniV),
                uni_ir: slot(UniIr),
                mul_v: slot(MulV),
                mul_ir: slot(MulIr),
                fuse_ffn: FfnParams::zeros(used.len() * d, config.ffn_hidden, d),
                fuse_ln: LayerNormParams::zeros(d),
            }
        });
        Ok(Self {
            config: config.clone(),
            image_embed: EmbedParams::zeros(config.image_channels, config.stem_channels, d),
            heatmap_embed: EmbedParams::zeros(1, config.stem_channels, d),
            temporal_v: variant.uses_temporal().then(temporal),
            temporal_ir: variant.uses_temporal().then(temporal),
            bridge,
        })
    }

    /// Seeded Gaussian initialization. Weights are fan-in scaled; layer-norm
    /// and stem affine parameters scatter around the identity.
    pub fn random(config: &PfmConfig, seed: u64) -> Result<Self, PfmError> {
        let mut p = Self::zeros(config)?;
        let mut rng = seeded_rng(seed);
        let d = config.d_model;
        for embed in [&mut p.image_embed, &mut p.heatmap_embed] {
            let (cin, cout) = (embed.stem.in_channels(), embed.stem.out_channels());
            embed.stem.conv = gaussian_matrix(&mut rng, cin * 49, cout, 1.0 / ((cin * 49) as f64).sqrt());
            embed.stem.scale = gaussian_vec(&mut rng, cout, 1.0, 0.1);
            embed.stem.shift = gaussian_vec(&mut rng, cout, 0.0, 0.1);
            embed.patch = random_linear(&mut rng, cout * PATCH * PATCH, d, true);
        }
        for t in [&mut p.temporal_v, &mut p.temporal_ir].into_iter().flatten() {
            *t = TemporalParams {
                attn: random_attention(&mut rng, d, config.n_heads, config.attention_bias),
                ln1: random_layer_norm(&mut rng, d),
                ffn: random_ffn(&mut rng, d, config.ffn_hidden, d),
                ln2: random_layer_norm(&mut rng, d),
            };
        }
        if let Some(b) = &mut p.bridge {
            for slot in [&mut b.uni_v, &mut b.uni_ir, &mut b.mul_v, &mut b.mul_ir]
                .into_iter()
                .flatten()
            {
                *slot = random_attention(&mut rng, d, config.n_heads, config.attention_bias);
            }
            b.fuse_ffn = random_ffn(&mut rng, b.fuse_ffn.d_in(), config.ffn_hidden, d);
            b.fuse_ln = random_layer_norm(&mut rng, d);
        }
        Ok(p)
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn to_document(&self) -> PfmDocument {
        PfmDocument {
            config: self.config.clone(),
            tensors: to_tensors(self),
        }
    }

    pub fn from_document(doc: &PfmDocument) -> Result<Self, PfmError> {
        let mut p = Self::zeros(&doc.config)?;
        fill_from_tensors(&mut p, &doc.tensors)?;
        Ok(p)
    }

    pub fn to_json(&self) -> Result<String, PfmError> {
        Ok(serde_json::to_string_pretty(&self.to_document())?)
    }

    pub fn from_json(text: &str) -> Result<Self, PfmError> {
        Self::from_document(&serde_json::from_str(text)?)
    }
}

/// The five single-channel-or-more frames the module consumes.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameImages {
    pub vis_t: Image,
    pub vis_prev: Image,
    pub ir_t: Image,
    pub ir_prev: Image,
    pub heatmap: Image,
}

crate::param_fields!(FrameImages {
    vis_t,
    vis_prev,
    ir_t,
    ir_prev,
    heatmap
});

const SLOTS: [&str; 5] = ["vis_t", "vis_prev", "ir_t", "ir_prev", "heatmap"];

impl FrameImages {
    pub fn new(
        vis_t: Image,
        vis_prev: Image,
        ir_t: Image,
        ir_prev: Image,
        prev_objects: &[ObjectCenter],
        splat: SplatRule,
    ) -> Self {
        let heatmap = render_heatmap_with(prev_objects, vis_t.height, vis_t.width, splat).to_image();
        Self {
            vis_t,
            vis_prev,
            ir_t,
            ir_prev,
            heatmap,
        }
    }

    fn slots(&self) -> [&Image; 5] {
        [&self.vis_t, &self.vis_prev, &self.ir_t, &self.ir_prev, &self.heatmap]
    }

    fn check(&self) -> Result<(), PfmError> {
        let (h, w) = (self.vis_t.height, self.vis_t.width);
        for (name, img) in SLOTS.iter().zip(self.slots()) {
            if (img.height, img.width) != (h, w) {
                return Err(PfmError::Shape(format!(
                    "{name} is {}x{}, expected {h}x{w}",
                    img.height, img.width
                )));
            }
        }
        Ok(())
    }
}

/// Inputs of one fusion step.
#[derive(Debug, Clone, PartialEq)]
pub struct PfmInputs {
    pub vis_t: Image,
    pub vis_prev: Image,
    pub ir_t: Image,
    pub ir_prev: Image,
    pub prev_objects: Vec<ObjectCenter>,
}

impl PfmInputs {
    pub fn frames(&self, splat: SplatRule) -> FrameImages {
        FrameImages::new(
            self.vis_t.clone(),
            self.vis_prev.clone(),
            self.ir_t.clone(),
            self.ir_prev.clone(),
            &self.prev_objects,
            splat,
        )
    }
}

/// Everything a forward pass keeps for its backward pass.
#[derive(Debug, Clone)]
pub struct PfmTape {
    /// Tokens and embedding caches in slot order.
    embeds: Vec<(Matrix, Arc<EmbedCache>)>,
    temporal: Option<(Arc<TemporalCache>, Arc<TemporalCache>)>,
    stage_one: (Matrix, Matrix),
    bridge: Option<MultimodalCache>,
    pos: Matrix,
}

impl PfmTape {
    fn pattern(&self) -> u64 {
        let mut p = 0;
        for (_, c) in &self.embeds {
            p = c.fold_pattern(p);
        }
        if let Some((v, ir)) = &self.temporal {
            p = ir.fold_pattern(v.fold_pattern(p));
        }
        if let Some(b) = &self.bridge {
            p = b.fold_pattern(p);
        }
        p
    }

    /// Named intermediates for inspection.
    pub fn intermediates(&self) -> BTreeMap<String, Matrix> {
        let mut out = BTreeMap::new();
        for (name, (tokens, _)) in SLOTS.iter().zip(&self.embeds) {
            out.insert(format!("tokens.{name}"), tokens.clone());
        }
        out.insert("position".into(), self.pos.clone());
        out.insert("stage_one.vis".into(), self.stage_one.0.clone());
        out.insert("stage_one.ir".into(), self.stage_one.1.clone());
        out.insert("stage_one.sum".into(), self.stage_one.0.add(&self.stage_one.1));
        out
    }
}

/// Gradients of one fusion step.
#[derive(Debug, Clone)]
pub struct PfmGrads {
    pub params: PfmParams,
    pub images: FrameImages,
}

enum EmbedMode {
    Full,
    Project,
    Reuse,
}

fn validate_params(params: &PfmParams) -> Result<(), PfmError> {
    let v = params.variant();
    if params.temporal_v.is_some() != v.uses_temporal() || params.temporal_ir.is_some() != v.uses_temporal() {
        return Err(PfmError::Variant(format!("temporal blocks do not match variant {v}")));
    }
    if params.bridge.is_some() != v.uses_bridge() {
        return Err(PfmError::Variant(format!("bridge block does not match variant {v}")));
    }
    if params.heatmap_embed.stem.in_channels() != 1 {
        return Err(PfmError::Shape("heatmap stem must take one channel".into()));
    }
    Ok(())
}

fn run(
    params: &PfmParams,
    images: &FrameImages,
    baseline: Option<(&PfmTape, &str)>,
) -> Result<(Matrix, PfmTape), PfmError> {
    validate_params(params)?;
    images.check()?;
    let mut embeds = Vec::with_capacity(5);
    for (i, (name, img)) in SLOTS.iter().zip(images.slots()).enumerate() {
        let embed = if i == 4 {
            &params.heatmap_embed
        } else {
            &params.image_embed
        };
        let prefix = if i == 4 {
            "params.heatmap_embed."
        } else {
            "params.image_embed."
        };
        let mode = match baseline {
            None => EmbedMode::Full,
            Some((_, key)) if key == format!("inputs.{name}") => EmbedMode::Full,
            Some((_, key)) if key.starts_with(&format!("{prefix}stem")) => EmbedMode::Full,
            Some((_, key)) if key.starts_with(&format!("{prefix}patch")) => EmbedMode::Project,
            Some(_) => EmbedMode::Reuse,
        };
        embeds.push(match (mode, baseline) {
            (EmbedMode::Project, Some((tape, _))) => {
                let cache = Arc::clone(&tape.embeds[i].1);
                (cache.project(&embed.patch)?, cache)
            }
            (EmbedMode::Reuse, Some((tape, _))) => tape.embeds[i].clone(),
            _ => {
                let (t, c) = embed_forward(img, embed)?;
                (t, Arc::new(c))
            }
        });
    }
    let (gh, gw) = (images.vis_t.height / PATCH, images.vis_t.width / PATCH);
    let pos = match baseline {
        Some((tape, _)) => tape.pos.clone(),
        None => positional_encoding(gh, gw, params.config.d_model)?.values,
    };
    let tok = |i: usize| &embeds[i].0;
    let (stage_one, temporal) = match (&params.temporal_v, &params.temporal_ir) {
        (Some(tv), Some(tir)) => {
            let (v, ir) = rayon::join(
                || temporal_forward(tok(0), tok(1), tok(4), &pos, tv),
                || temporal_forward(tok(2), tok(3), tok(4), &pos, tir),
            );
            let ((xv, cv), (xir, cir)) = (v?, ir?);
            ((xv, xir), Some((Arc::new(cv), Arc::new(cir))))
        }
        _ => ((tok(0).clone(), tok(2).clone()), None),
    };
    let (out, bridge) = match &params.bridge {
        Some(b) => {
            let (y, c) = multimodal_forward(&stage_one.0, &stage_one.1, b, params.variant())?;
            (y, Some(c))
        }
        None => (stage_one.0.add(&stage_one.1), None),
    };
    Ok((
        out,
        PfmTape {
            embeds,
            temporal,
            stage_one,
            bridge,
            pos,
        },
    ))
}

/// Heatmap rendering, token embedding, the temporal stage per modality and
/// the multimodal stage, wired per the configured variant.
pub fn pfm_forward(inputs: &PfmInputs, params: &PfmParams) -> Result<Matrix, PfmError> {
    pfm_forward_frames(&inputs.frames(params.config.splat), params).map(|(y, _)| y)
}

pub fn pfm_forward_frames(images: &FrameImages, params: &PfmParams) -> Result<(Matrix, PfmTape), PfmError> {
    run(params, images, None)
}

/// Output plus every named intermediate, including the rendered heatmap.
pub fn pfm_trace(inputs: &PfmInputs, params: &PfmParams) -> Result<(Matrix, BTreeMap<String, Matrix>), PfmError> {
    let frames = inputs.frames(params.config.splat);
    let (out, tape) = run(params, &frames, None)?;
    let mut stages = tape.intermediates();
    let hm = &frames.heatmap;
    stages.insert(
        "heatmap".into(),
        Matrix::from_vec(hm.height, hm.width, hm.data.clone())?,
    );
    stages.insert("output".into(), out.clone());
    Ok((out, stages))
}

pub fn pfm_backward(tape: &PfmTape, params: &PfmParams, d_out: &Matrix) -> PfmGrads {
    let mut grads = PfmParams {
        config: params.config.clone(),
        image_embed: params.image_embed.zeros_like(),
        heatmap_embed: params.heatmap_embed.zeros_like(),
        temporal_v: None,
        temporal_ir: None,
        bridge: None,
    };
    let (d_v, d_ir) = match (&params.bridge, &tape.bridge) {
        (Some(b), Some(cache)) => {
            let g = multimodal_backward(cache, b, d_out);
            grads.bridge = Some(g.params);
            (g.xv, g.xir)
        }
        _ => (d_out.clone(), d_out.clone()),
    };
    let zeros = Matrix::zeros(d_out.rows(), d_out.cols());
    let d_tokens: [Matrix; 5] = match (&params.temporal_v, &params.temporal_ir, &tape.temporal) {
        (Some(tv), Some(tir), Some((cv, cir))) => {
            let (gv, gir) = rayon::join(
                || temporal_backward(cv, tv, &d_v),
                || temporal_backward(cir, tir, &d_ir),
            );
            let d_hm = gv.x_hm.add(&gir.x_hm);
            grads.temporal_v = Some(gv.params);
            grads.temporal_ir = Some(gir.params);
            [gv.x_t, gv.x_prev, gir.x_t, gir.x_prev, d_hm]
        }
        _ => [d_v, zeros.clone(), d_ir, zeros.clone(), zeros],
    };
    let mut d_images = Vec::with_capacity(5);
    for (i, ((_, cache), d)) in tape.embeds.iter().zip(&d_tokens).enumerate() {
        let (embed, acc) = if i == 4 {
            (&params.heatmap_embed, &mut grads.heatmap_embed)
        } else {
            (&params.image_embed, &mut grads.image_embed)
        };
        let (d_img, g) = embed_backward(cache, embed, d);
        accumulate(acc, &g);
        d_images.push(d_img);
    }
    let mut it = d_images.into_iter();
    let mut next = || it.next().expect("five slots");
    PfmGrads {
        params: grads,
        images: FrameImages {
            vis_t: next(),
            vis_prev: next(),
            ir_t: next(),
            ir_prev: next(),
            heatmap: next(),
        },
    }
}

fn accumulate(acc: &mut dyn ParamSet, g: &dyn ParamSet) {
    let flat = g.flatten("");
    acc.visit_mut("", &mut |k, _, v| {
        for (a, b) in v.iter_mut().zip(&flat[k]) {
            *a += b;
        }
    });
}

/// Gradient-check problem over every parameter and every input pixel
/// (the rendered heatmap included).
#[derive(Debug, Clone)]
pub struct PfmProblem {
    pub params: PfmParams,
    pub inputs: FrameImages,
}

crate::param_fields!(PfmProblem { params, inputs });

impl PfmProblem {
    /// Random parameters, uniform `[0, 1)` frames and a few random objects.
    pub fn random(config: &PfmConfig, seed: u64) -> Result<Self, PfmError> {
        let params = PfmParams::random(config, seed)?;
        let mut rng = seeded_rng(seed ^ 0x5eed_f00d);
        let (c, h, w) = (config.image_channels, config.image_height, config.image_width);
        let mut frame = || Image::new(c, h, w, (0..c * h * w).map(|_| rng.gen::<f64>()).collect());
        let (vis_t, vis_prev, ir_t, ir_prev) = (frame()?, frame()?, frame()?, frame()?);
        let objects: Vec<ObjectCenter> = (0..3)
            .map(|_| {
                ObjectCenter::new(
                    rng.gen_range(0.0..w as f64),
                    rng.gen_range(0.0..h as f64),
                    rng.gen_range(4.0..16.0),
                    rng.gen_range(8.0..24.0),
                )
            })
            .collect();
        Ok(Self {
            inputs: FrameImages::new(vis_t, vis_prev, ir_t, ir_prev, &objects, config.splat),
            params,
        })
    }
}

impl Differentiable for PfmProblem {
    type Tape = PfmTape;

    fn forward(&self) -> Result<Evaluation<PfmTape>, PfmError> {
        let (output, tape) = run(&self.params, &self.inputs, None)?;
        Ok(Evaluation {
            output,
            pattern: tape.pattern(),
            tape,
        })
    }

    fn backward(&self, eval: &Evaluation<PfmTape>, d_out: &Matrix) -> Result<Gradients, PfmError> {
        let g = pfm_backward(&eval.tape, &self.params, d_out);
        let mut out = prefixed("params", g.params.flatten(""));
        out.extend(prefixed("inputs", g.images.flatten("")));
        Ok(out)
    }

    fn reforward(&self, baseline: &Evaluation<PfmTape>, changed: &str) -> Result<Evaluation<PfmTape>, PfmError> {
        let (output, tape) = run(&self.params, &self.inputs, Some((&baseline.tape, changed)))?;
        Ok(Evaluation {
            output,
            pattern: tape.pattern(),
            tape,
        })
    }
}

/// Convenience for tests and the demo: a heatmap for `objects` at the
/// configured splat rule.
pub fn heatmap_for(config: &PfmConfig, objects: &[ObjectCenter]) -> HeatMap {
    render_heatmap_with(objects, config.image_height, config.image_width, config.splat)
}
