use serde::{Deserialize, Serialize};

use super::embed::Image;

/// Center and size of an object in the previous frame, in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectCenter {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl ObjectCenter {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self { cx, cy, w, h }
    }

    /// From a top-left `(x, y, w, h)` box as written in detection files.
    pub fn from_top_left(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self::new(x + w / 2.0, y + h / 2.0, w, h)
    }

    fn clamped(&self, height: usize, width: usize) -> (f64, f64) {
        (
            self.cx.clamp(0.0, (width - 1) as f64),
            self.cy.clamp(0.0, (height - 1) as f64),
        )
    }
}

/// Splat width rule: `σ = max(min_sigma, min(w, h) / size_divisor)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplatRule {
    pub min_sigma: f64,
    pub size_divisor: f64,
}

impl Default for SplatRule {
    fn default() -> Self {
        Self {
            min_sigma: 1.0,
            size_divisor: 6.0,
        }
    }
}

impl SplatRule {
    pub fn sigma(&self, o: &ObjectCenter) -> f64 {
        (o.w.min(o.h) / self.size_divisor).max(self.min_sigma)
    }
}

/// Single-channel map with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatMap {
    pub height: usize,
    pub width: usize,
    /// Row-major.
    pub values: Vec<f64>,
}

impl HeatMap {
    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn to_image(&self) -> Image {
        Image {
            channels: 1,
            height: self.height,
            width: self.width,
            data: self.values.clone(),
        }
    }
}

pub fn render_heatmap(objects: &[ObjectCenter], height: usize, width: usize) -> HeatMap {
    render_heatmap_with(objects, height, width, SplatRule::default())
}

/// Unnormalized Gaussian per object, combined by pointwise maximum.
pub fn render_heatmap_with(objects: &[ObjectCenter], height: usize, width: usize, rule: SplatRule) -> HeatMap {
    let mut values = vec![0.0f64; height * width];
    if height > 0 && width > 0 {
        for o in objects {
            let (cx, cy) = o.clamped(height, width);
            let two_sigma_sq = 2.0 * rule.sigma(o).powi(2);
            for y in 0..height {
                let dy = y as f64 - cy;
                for x in 0..width {
                    let dx = x as f64 - cx;
                    let v = (-(dx * dx + dy * dy) / two_sigma_sq).exp();
                    let slot = &mut values[y * width + x];
                    *slot = slot.max(v);
                }
            }
        }
    }
    HeatMap { height, width, values }
}
