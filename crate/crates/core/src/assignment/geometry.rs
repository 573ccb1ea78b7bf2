use serde::{Deserialize, Serialize};

/// Axis-aligned box in pixel coordinates, anchored at its top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub const fn new(x: f64, y: f64, w: f64, h: f64) -> Self {
        Self { x, y, w, h }
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Self {
        Self::new(cx - w / 2.0, cy - h / 2.0, w, h)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn area(&self) -> f64 {
        self.w.max(0.0) * self.h.max(0.0)
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.w.is_finite() && self.h.is_finite()
    }

    pub fn intersection_area(&self, other: &BBox) -> f64 {
        // offsets are taken first so identical boxes overlap by exactly w×h
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let iw = self.w.min(other.w).min(dx + self.w).min(other.w - dx);
        let ih = self.h.min(other.h).min(dy + self.h).min(other.h - dy);
        if iw <= 0.0 || ih <= 0.0 {
            0.0
        } else {
            iw * ih
        }
    }
}

/// Intersection over union. Zero-area boxes never overlap anything, including
/// an identical zero-area box.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let area_a = a.area();
    let area_b = b.area();
    if area_a <= 0.0 || area_b <= 0.0 {
        return 0.0;
    }
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    let union = area_a + area_b - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Dense IoU table, `rows.len() × cols.len()`, row-major.
pub fn iou_matrix(rows: &[BBox], cols: &[BBox]) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * cols.len());
    for r in rows {
        for c in cols {
            out.push(iou(r, c));
        }
    }
    out
}
