use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::clear::check_threshold;
use super::frames::SequenceData;
use super::MetricsError;
use crate::assignment::{max_weight_matching, CostMatrix};
use crate::mot_data::TrajectorySet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IdCounts {
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

impl AddAssign for IdCounts {
    fn add_assign(&mut self, o: Self) {
        self.idtp += o.idtp;
        self.idfp += o.idfp;
        self.idfn += o.idfn;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdReport {
    pub idf1: f64,
    pub idtp: u64,
    pub idfp: u64,
    pub idfn: u64,
}

impl From<IdCounts> for IdReport {
    fn from(c: IdCounts) -> Self {
        let denom = 2 * c.idtp + c.idfp + c.idfn;
        let idf1 = if denom > 0 {
            2.0 * c.idtp as f64 / denom as f64
        } else {
            0.0
        };
        Self {
            idf1,
            idtp: c.idtp,
            idfp: c.idfp,
            idfn: c.idfn,
        }
    }
}

/// Identity F1 under the best one-to-one pairing of whole trajectories. A
/// frame contributes an identity true positive for a paired (gt, pred) when
/// both are present and overlap with IoU at or above `threshold`.
pub fn idf1(gt: &TrajectorySet, pred: &TrajectorySet, threshold: f64) -> Result<IdReport, MetricsError> {
    check_threshold(threshold)?;
    Ok(id_counts(&SequenceData::from_trajectories(gt, pred), threshold).into())
}

pub(crate) fn id_counts(data: &SequenceData, threshold: f64) -> IdCounts {
    let (n_gt, n_pred) = (data.gt_ids.len(), data.pred_ids.len());
    let mut overlap = vec![0.0f64; n_gt * n_pred];
    for frame in &data.frames {
        for (g, &gi) in frame.gt.iter().enumerate() {
            for (p, &pj) in frame.pred.iter().enumerate() {
                if frame.sim(g, p) >= threshold {
                    overlap[gi * n_pred + pj] += 1.0;
                }
            }
        }
    }
    let eligible: Vec<bool> = overlap.iter().map(|&c| c > 0.0).collect();
    let weights = CostMatrix::new(n_gt, n_pred, overlap).expect("frame counts are finite");
    let idtp: u64 = max_weight_matching(&weights, None, &eligible)
        .into_iter()
        .map(|(g, p)| weights.get(g, p) as u64)
        .sum();
    IdCounts {
        idtp,
        idfp: data.n_pred_boxes() - idtp,
        idfn: data.n_gt_boxes() - idtp,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::BBox;
    use crate::mot_data::ObjectClass;

    fn track(set: &mut TrajectorySet, id: u32, frames: impl Iterator<Item = u32>, x: f64) {
        for f in frames {
            set.push(id, f, BBox::new(x, 0.0, 10.0, 10.0), ObjectClass::ONE)
                .unwrap();
        }
    }

    #[test]
    fn identical_sets() {
        let mut gt = TrajectorySet::new();
        track(&mut gt, 1, 1..=10, 0.0);
        track(&mut gt, 2, 3..=8, 40.0);
        let r = idf1(&gt, &gt, 0.5).unwrap();
        assert_eq!(r.idf1, 1.0);
        assert_eq!((r.idtp, r.idfp, r.idfn), (16, 0, 0));
    }

    #[test]
    fn half_covered_track() {
        let mut gt = TrajectorySet::new();
        track(&mut gt, 1, 1..=10, 0.0);
        let mut pred = TrajectorySet::new();
        track(&mut pred, 5, 1..=5, 0.0);
        let r = idf1(&gt, &pred, 0.5).unwrap();
        assert_eq!((r.idtp, r.idfn, r.idfp), (5, 5, 0));
        assert!((r.idf1 - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn empty_prediction() {
        let mut gt = TrajectorySet::new();
        track(&mut gt, 1, 1..=4, 0.0);
        let r = idf1(&gt, &TrajectorySet::new(), 0.5).unwrap();
        assert_eq!(r.idf1, 0.0);
        assert_eq!(r.idfn, 4);
    }
}
