use serde::{Deserialize, Serialize};

use crate::core::{fold_relu_pattern, relu, relu_backward, Linear, Matrix, ParamSet};
use crate::PfmError;

/// Stem kernel side.
pub const STEM_KERNEL: usize = 7;
/// Patch side and stride of the token projection.
pub const PATCH: usize = 16;

const PAD: usize = STEM_KERNEL / 2;
const TAPS: usize = STEM_KERNEL * STEM_KERNEL;

/// Channel-major (`channels × height × width`) image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Image {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn new(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Result<Self, PfmError> {
        if data.len() != channels * height * width {
            return Err(PfmError::Shape(format!(
                "{} values for a {channels}x{height}x{width} image",
                data.len()
            )));
        }
        Ok(Self {
            channels,
            height,
            width,
            data,
        })
    }

    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    pub fn n_tokens(&self) -> usize {
        (self.height / PATCH) * (self.width / PATCH)
    }
}

impl ParamSet for Image {
    fn visit(&self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        f(prefix, &[self.channels, self.height, self.width], &self.data);
    }

    fn visit_mut(&mut self, prefix: &str, f: &mut dyn FnMut(&str, &[usize], &mut [f64])) {
        let shape = [self.channels, self.height, self.width];
        f(prefix, &shape, &mut self.data);
    }
}

/// 7×7 stride-1 convolution without bias, per-channel affine standing in for
/// inference-mode batch normalization, then ReLU.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StemParams {
    /// `(in_channels·49) × out_channels`, rows ordered (channel, ky, kx).
    pub conv: Matrix,
    pub scale: Vec<f64>,
    pub shift: Vec<f64>,
}

crate::param_fields!(StemParams { conv, scale, shift });

impl StemParams {
    pub fn zeros(in_channels: usize, out_channels: usize) -> Self {
        Self {
            conv: Matrix::zeros(in_channels * TAPS, out_channels),
            scale: vec![0.0; out_channels],
            shift: vec![0.0; out_channels],
        }
    }

    pub fn in_channels(&self) -> usize {
        self.conv.rows() / TAPS
    }

    pub fn out_channels(&self) -> usize {
        self.conv.cols()
    }
}

/// Stem followed by the 16×16 stride-16 patch projection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbedParams {
    pub stem: StemParams,
    /// `(stem_channels·256) × d`, rows ordered (channel, py, px).
    pub patch: Linear,
}

crate::param_fields!(EmbedParams { stem, patch });

impl EmbedParams {
    pub fn zeros(in_channels: usize, stem_channels: usize, d: usize) -> Self {
        Self {
            stem: StemParams::zeros(in_channels, stem_channels),
            patch: Linear::new(Matrix::zeros(stem_channels * PATCH * PATCH, d), Some(vec![0.0; d])),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            stem: StemParams::zeros(self.stem.in_channels(), self.stem.out_channels()),
            patch: self.patch.zeros_like(),
        }
    }

    pub fn d(&self) -> usize {
        self.patch.d_out()
    }

    fn validate(&self, image: &Image) -> Result<(), PfmError> {
        let s = &self.stem;
        if s.conv.rows() % TAPS != 0 || s.scale.len() != s.out_channels() || s.shift.len() != s.out_channels() {
            return Err(PfmError::Shape("stem weights and affine do not agree".into()));
        }
        if image.channels != s.in_channels() {
            return Err(PfmError::Shape(format!(
                "image has {} channels, stem expects {}",
                image.channels,
                s.in_channels()
            )));
        }
        if self.patch.d_in() != s.out_channels() * PATCH * PATCH {
            return Err(PfmError::Shape(
                "patch projection width does not match stem channels".into(),
            ));
        }
        if image.height == 0 || image.width == 0 || image.height % PATCH != 0 || image.width % PATCH != 0 {
            return Err(PfmError::Indivisible {
                height: image.height,
                width: image.width,
                patch: PATCH,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct EmbedCache {
    height: usize,
    width: usize,
    in_channels: usize,
    cols: Matrix,
    conv: Matrix,
    pre: Matrix,
    patches: Matrix,
}

impl EmbedCache {
    /// ReLU on/off pattern of the stem.
    pub fn fold_pattern(&self, pattern: u64) -> u64 {
        fold_relu_pattern(pattern, &self.pre)
    }

    /// Tokens from the cached stem output under a different projection.
    pub fn project(&self, patch: &Linear) -> Result<Matrix, PfmError> {
        patch.forward(&self.patches)
    }
}

/// Zero-padded 7×7 neighbourhoods, one row per pixel.
fn im2col(image: &Image) -> Matrix {
    let (h, w) = (image.height, image.width);
    let mut cols = Matrix::zeros(h * w, image.channels * TAPS);
    for y in 0..h {
        for x in 0..w {
            let row = cols.row_mut(y * w + x);
            for c in 0..image.channels {
                for ky in 0..STEM_KERNEL {
                    let Some(sy) = (y + ky).checked_sub(PAD).filter(|&sy| sy < h) else {
                        continue;
                    };
                    for kx in 0..STEM_KERNEL {
                        if let Some(sx) = (x + kx).checked_sub(PAD).filter(|&sx| sx < w) {
                            row[c * TAPS + ky * STEM_KERNEL + kx] = image.at(c, sy, sx);
                        }
                    }
                }
            }
        }
    }
    cols
}

fn col2im(d_cols: &Matrix, channels: usize, h: usize, w: usize) -> Image {
    let mut out = Image::zeros(channels, h, w);
    for y in 0..h {
        for x in 0..w {
            let row = d_cols.row(y * w + x);
            for c in 0..channels {
                for ky in 0..STEM_KERNEL {
                    let Some(sy) = (y + ky).checked_sub(PAD).filter(|&sy| sy < h) else {
                        continue;
                    };
                    for kx in 0..STEM_KERNEL {
                        if let Some(sx) = (x + kx).checked_sub(PAD).filter(|&sx| sx < w) {
                            out.data[(c * h + sy) * w + sx] += row[c * TAPS + ky * STEM_KERNEL + kx];
                        }
                    }
                }
            }
        }
    }
    out
}

/// `(token, patch column, pixel, stem channel)` for every patch entry.
fn patch_layout(h: usize, w: usize, channels: usize) -> impl Iterator<Item = (usize, usize, usize, usize)> {
    let grid_w = w / PATCH;
    (0..(h / PATCH) * grid_w).flat_map(move |token| {
        let (gy, gx) = (token / grid_w, token % grid_w);
        (0..channels).flat_map(move |c| {
            (0..PATCH * PATCH).map(move |k| {
                let (py, px) = (k / PATCH, k % PATCH);
                let pixel = (gy * PATCH + py) * w + gx * PATCH + px;
                (token, c * PATCH * PATCH + k, pixel, c)
            })
        })
    })
}

pub fn embed_tokens(image: &Image, params: &EmbedParams) -> Result<Matrix, PfmError> {
    embed_forward(image, params).map(|(t, _)| t)
}

pub fn embed_forward(image: &Image, params: &EmbedParams) -> Result<(Matrix, EmbedCache), PfmError> {
    params.validate(image)?;
    let (h, w) = (image.height, image.width);
    let stem = &params.stem;
    let cols = im2col(image);
    let conv = cols.matmul(&stem.conv);
    let mut pre = conv.clone();
    for r in 0..pre.rows() {
        for ((v, s), b) in pre.row_mut(r).iter_mut().zip(&stem.scale).zip(&stem.shift) {
            *v = *v * s + b;
        }
    }
    let feat = relu(&pre);
    let channels = stem.out_channels();
    let mut patches = Matrix::zeros(image.n_tokens(), channels * PATCH * PATCH);
    for (token, col, pixel, c) in patch_layout(h, w, channels) {
        patches[(token, col)] = feat[(pixel, c)];
    }
    let tokens = params.patch.forward(&patches)?;
    Ok((
        tokens,
        EmbedCache {
            height: h,
            width: w,
            in_channels: image.channels,
            cols,
            conv,
            pre,
            patches,
        },
    ))
}

/// Returns `(d_image, parameter gradients)`.
pub fn embed_backward(cache: &EmbedCache, params: &EmbedParams, d_tokens: &Matrix) -> (Image, EmbedParams) {
    let (h, w) = (cache.height, cache.width);
    let stem = &params.stem;
    let channels = stem.out_channels();
    let (d_patches, g_patch) = params.patch.backward(&cache.patches, d_tokens);
    let mut d_feat = Matrix::zeros(h * w, channels);
    for (token, col, pixel, c) in patch_layout(h, w, channels) {
        d_feat[(pixel, c)] = d_patches[(token, col)];
    }
    let d_pre = relu_backward(&cache.pre, &d_feat);
    let mut g_scale = vec![0.0; channels];
    let mut g_shift = vec![0.0; channels];
    let mut d_conv = d_pre.clone();
    for r in 0..d_pre.rows() {
        for c in 0..channels {
            g_scale[c] += d_pre[(r, c)] * cache.conv[(r, c)];
            g_shift[c] += d_pre[(r, c)];
            d_conv[(r, c)] *= stem.scale[c];
        }
    }
    let g_conv = cache.cols.t_matmul(&d_conv);
    let d_image = col2im(&d_conv.matmul_t(&stem.conv), cache.in_channels, h, w);
    let grads = EmbedParams {
        stem: StemParams {
            conv: g_conv,
            scale: g_scale,
            shift: g_shift,
        },
        patch: g_patch,
    };
    (d_image, grads)
}
