use std::collections::{BTreeMap, BTreeSet};

use super::MetricsError;
use crate::assignment::iou;
use crate::mot_data::{FrameObjects, TrajectorySet};

/// One frame with identities mapped to dense indices and the gt × pred IoU
/// table.
#[derive(Debug, Clone)]
pub(crate) struct FrameData {
    pub gt: Vec<usize>,
    pub pred: Vec<usize>,
    /// Row-major, `gt.len() × pred.len()`.
    pub sim: Vec<f64>,
}

impl FrameData {
    pub fn sim(&self, g: usize, p: usize) -> f64 {
        self.sim[g * self.pred.len() + p]
    }
}

/// A whole sequence in dense-index form.
#[derive(Debug, Clone)]
pub(crate) struct SequenceData {
    pub frames: Vec<FrameData>,
    pub gt_ids: Vec<u32>,
    pub pred_ids: Vec<u32>,
    /// Frames in which each gt / pred identity is present.
    pub gt_counts: Vec<u64>,
    pub pred_counts: Vec<u64>,
}

impl SequenceData {
    pub fn n_gt_boxes(&self) -> u64 {
        self.gt_counts.iter().sum()
    }

    pub fn n_pred_boxes(&self) -> u64 {
        self.pred_counts.iter().sum()
    }

    /// Aligns two per-frame lists; they must cover the same frame numbers in
    /// the same order and hold unique identities per frame.
    pub fn from_frames(gt: &[FrameObjects], pred: &[FrameObjects]) -> Result<Self, MetricsError> {
        if gt.len() != pred.len() || gt.iter().zip(pred).any(|(g, p)| g.frame != p.frame) {
            return Err(MetricsError::FrameMismatch {
                gt_frames: gt.len(),
                pred_frames: pred.len(),
            });
        }
        let index = |lists: &[FrameObjects]| -> Result<BTreeMap<u32, usize>, MetricsError> {
            for f in lists {
                let mut seen = BTreeSet::new();
                for &(id, _) in &f.entries {
                    if !seen.insert(id) {
                        return Err(MetricsError::DuplicateId { frame: f.frame, id });
                    }
                }
            }
            let ids: BTreeSet<u32> = lists.iter().flat_map(|f| f.entries.iter().map(|e| e.0)).collect();
            Ok(ids.into_iter().enumerate().map(|(i, id)| (id, i)).collect())
        };
        let gt_index = index(gt)?;
        let pred_index = index(pred)?;
        let mut gt_counts = vec![0u64; gt_index.len()];
        let mut pred_counts = vec![0u64; pred_index.len()];

        let frames = gt
            .iter()
            .zip(pred)
            .map(|(g, p)| {
                let gt_dense: Vec<usize> = g.entries.iter().map(|e| gt_index[&e.0]).collect();
                let pred_dense: Vec<usize> = p.entries.iter().map(|e| pred_index[&e.0]).collect();
                for &i in &gt_dense {
                    gt_counts[i] += 1;
                }
                for &j in &pred_dense {
                    pred_counts[j] += 1;
                }
                let mut sim = Vec::with_capacity(g.entries.len() * p.entries.len());
                for (_, gb) in &g.entries {
                    for (_, pb) in &p.entries {
                        sim.push(iou(gb, pb));
                    }
                }
                FrameData {
                    gt: gt_dense,
                    pred: pred_dense,
                    sim,
                }
            })
            .collect();

        Ok(Self {
            frames,
            gt_ids: gt_index.into_keys().collect(),
            pred_ids: pred_index.into_keys().collect(),
            gt_counts,
            pred_counts,
        })
    }

    /// Both trajectory sets over frames `1..=n_frames`, where `n_frames` is
    /// the last frame either set touches.
    pub fn from_trajectories(gt: &TrajectorySet, pred: &TrajectorySet) -> Self {
        let n = gt.max_frame().unwrap_or(0).max(pred.max_frame().unwrap_or(0));
        Self::from_frames(&gt.frame_objects(n), &pred.frame_objects(n))
            .expect("trajectory sets are aligned and unique per frame")
    }
}
