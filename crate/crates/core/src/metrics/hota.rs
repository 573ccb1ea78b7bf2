use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::frames::SequenceData;
use crate::assignment::{max_weight_matching, CostMatrix};
use crate::mot_data::TrajectorySet;

/// Localization thresholds 0.05, 0.10, ..., 0.95.
pub const N_ALPHAS: usize = 19;

pub fn alphas() -> [f64; N_ALPHAS] {
    // k / 20 keeps every grid point the nearest double to its decimal value
    std::array::from_fn(|k| (k + 1) as f64 / 20.0)
}

/// Per-threshold detection counts plus the summed association score of the
/// true positives; pooled across sequences by addition.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HotaCounts {
    pub tp: [u64; N_ALPHAS],
    pub fn_: [u64; N_ALPHAS],
    pub fp: [u64; N_ALPHAS],
    pub ass_sum: [f64; N_ALPHAS],
}

impl Default for HotaCounts {
    fn default() -> Self {
        Self {
            tp: [0; N_ALPHAS],
            fn_: [0; N_ALPHAS],
            fp: [0; N_ALPHAS],
            ass_sum: [0.0; N_ALPHAS],
        }
    }
}

impl AddAssign for HotaCounts {
    fn add_assign(&mut self, o: Self) {
        for a in 0..N_ALPHAS {
            self.tp[a] += o.tp[a];
            self.fn_[a] += o.fn_[a];
            self.fp[a] += o.fp[a];
            self.ass_sum[a] += o.ass_sum[a];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaScore {
    pub alpha: f64,
    pub deta: f64,
    pub assa: f64,
    pub hota: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HotaReport {
    pub hota: f64,
    pub deta: f64,
    pub assa: f64,
    pub per_alpha: Vec<AlphaScore>,
}

impl From<&HotaCounts> for HotaReport {
    fn from(c: &HotaCounts) -> Self {
        let per_alpha: Vec<AlphaScore> = alphas()
            .iter()
            .enumerate()
            .map(|(a, &alpha)| {
                let deta = c.tp[a] as f64 / (c.tp[a] + c.fn_[a] + c.fp[a]).max(1) as f64;
                let assa = c.ass_sum[a] / c.tp[a].max(1) as f64;
                AlphaScore {
                    alpha,
                    deta,
                    assa,
                    hota: (deta * assa).sqrt(),
                }
            })
            .collect();
        let mean = |f: fn(&AlphaScore) -> f64| per_alpha.iter().map(f).sum::<f64>() / N_ALPHAS as f64;
        Self {
            hota: mean(|s| s.hota),
            deta: mean(|s| s.deta),
            assa: mean(|s| s.assa),
            per_alpha,
        }
    }
}

/// Higher-order tracking accuracy averaged over the 19 localization
/// thresholds.
///
/// At each threshold α, every frame is matched one-to-one among pairs with
/// IoU ≥ α, maximizing first the global alignment score of the pair's
/// identities and then IoU. The global alignment score is the IoU-weighted
/// co-occurrence of two identities over the union of their lifetimes.
pub fn hota(gt: &TrajectorySet, pred: &TrajectorySet) -> HotaReport {
    HotaReport::from(&hota_counts(&SequenceData::from_trajectories(gt, pred)))
}

pub(crate) fn hota_counts(data: &SequenceData) -> HotaCounts {
    let (n_gt, n_pred) = (data.gt_ids.len(), data.pred_ids.len());
    let mut counts = HotaCounts::default();
    if n_gt == 0 || n_pred == 0 {
        let gt_total = data.n_gt_boxes();
        let pred_total = data.n_pred_boxes();
        counts.fn_ = [gt_total; N_ALPHAS];
        counts.fp = [pred_total; N_ALPHAS];
        return counts;
    }

    // Soft co-occurrence: each frame contributes sim / (row sum + col sum - sim)
    let mut potential = vec![0.0f64; n_gt * n_pred];
    for frame in &data.frames {
        let np = frame.pred.len();
        let row_sums: Vec<f64> = (0..frame.gt.len())
            .map(|g| frame.sim[g * np..(g + 1) * np].iter().sum())
            .collect();
        let col_sums: Vec<f64> = (0..np)
            .map(|p| (0..frame.gt.len()).map(|g| frame.sim(g, p)).sum())
            .collect();
        for (g, &gi) in frame.gt.iter().enumerate() {
            for (p, &pj) in frame.pred.iter().enumerate() {
                let s = frame.sim(g, p);
                let denom = row_sums[g] + col_sums[p] - s;
                if s > 0.0 && denom > 0.0 {
                    potential[gi * n_pred + pj] += s / denom;
                }
            }
        }
    }
    let alignment: Vec<f64> = potential
        .iter()
        .enumerate()
        .map(|(k, &pot)| {
            let union = data.gt_counts[k / n_pred] as f64 + data.pred_counts[k % n_pred] as f64 - pot;
            if union > 0.0 {
                pot / union
            } else {
                0.0
            }
        })
        .collect();

    let grid = alphas();
    let mut matched = vec![vec![0u64; n_gt * n_pred]; N_ALPHAS];
    for frame in &data.frames {
        let (ng, np) = (frame.gt.len(), frame.pred.len());
        if ng == 0 || np == 0 {
            for a in 0..N_ALPHAS {
                counts.fn_[a] += ng as u64;
                counts.fp[a] += np as u64;
            }
            continue;
        }
        let primary = CostMatrix::from_fn(ng, np, |g, p| alignment[frame.gt[g] * n_pred + frame.pred[p]])
            .expect("finite alignment scores");
        let secondary = CostMatrix::new(ng, np, frame.sim.clone()).expect("finite IoU");
        for (a, &alpha) in grid.iter().enumerate() {
            let eligible: Vec<bool> = frame.sim.iter().map(|&s| s >= alpha).collect();
            let pairs = max_weight_matching(&primary, Some(&secondary), &eligible);
            counts.tp[a] += pairs.len() as u64;
            counts.fn_[a] += (ng - pairs.len()) as u64;
            counts.fp[a] += (np - pairs.len()) as u64;
            for (g, p) in pairs {
                matched[a][frame.gt[g] * n_pred + frame.pred[p]] += 1;
            }
        }
    }

    for (a, table) in matched.iter().enumerate() {
        let mut sum = 0.0;
        for (k, &m) in table.iter().enumerate() {
            if m == 0 {
                continue;
            }
            let union = data.gt_counts[k / n_pred] + data.pred_counts[k % n_pred] - m;
            // every one of the m true positives scores m / union
            sum += m as f64 * (m as f64 / union as f64);
        }
        counts.ass_sum[a] = sum;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::BBox;
    use crate::mot_data::ObjectClass;

    fn single(id: u32, frames: std::ops::RangeInclusive<u32>, bbox: BBox) -> TrajectorySet {
        let mut t = TrajectorySet::new();
        for f in frames {
            t.push(id, f, bbox, ObjectClass::ONE).unwrap();
        }
        t
    }

    #[test]
    fn alpha_grid() {
        let g = alphas();
        assert_eq!(g[0], 0.05);
        assert_eq!(g[11], 0.6);
        assert_eq!(g[18], 0.95);
    }

    #[test]
    fn identical_sets_score_one() {
        let mut gt = single(1, 1..=6, BBox::new(0.0, 0.0, 10.0, 10.0));
        gt.push(2, 2, BBox::new(4.0, 0.0, 10.0, 10.0), ObjectClass::ONE)
            .unwrap();
        let r = hota(&gt, &gt);
        assert_eq!((r.hota, r.deta, r.assa), (1.0, 1.0, 1.0));
    }

    #[test]
    fn single_detection_at_iou_point_six() {
        let gt = single(1, 1..=1, BBox::new(0.0, 0.0, 10.0, 10.0));
        let pred = single(1, 1..=1, BBox::new(0.0, 0.0, 6.0, 10.0));
        let r = hota(&gt, &pred);
        for s in &r.per_alpha {
            let expected = if s.alpha <= 0.6 { 1.0 } else { 0.0 };
            assert_eq!(s.hota, expected, "alpha {}", s.alpha);
        }
        assert!((r.hota - 12.0 / 19.0).abs() < 1e-12);
    }

    #[test]
    fn split_prediction_halves_association() {
        let b = BBox::new(0.0, 0.0, 10.0, 10.0);
        let gt = single(1, 1..=10, b);
        let mut pred = single(1, 1..=5, b);
        for f in 6..=10 {
            pred.push(2, f, b, ObjectClass::ONE).unwrap();
        }
        let r = hota(&gt, &pred);
        for s in &r.per_alpha {
            assert_eq!(s.deta, 1.0);
            assert_eq!(s.assa, 0.5);
            assert!((s.hota - 0.5f64.sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_prediction_scores_zero() {
        let gt = single(1, 1..=3, BBox::new(0.0, 0.0, 10.0, 10.0));
        let r = hota(&gt, &TrajectorySet::new());
        assert_eq!(r.hota, 0.0);
    }
}
