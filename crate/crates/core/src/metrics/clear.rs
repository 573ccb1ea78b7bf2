use std::collections::HashMap;
use std::ops::AddAssign;

use serde::{Deserialize, Serialize};

use super::frames::SequenceData;
use super::MetricsError;
use crate::assignment::{match_with_threshold, CostMatrix};
use crate::mot_data::FrameObjects;

/// Raw CLEAR counts; these are what gets pooled across sequences.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ClearCounts {
    pub n_gt: u64,
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub idsw: u64,
    /// Sum of IoU over true positives.
    pub iou_sum: f64,
}

impl AddAssign for ClearCounts {
    fn add_assign(&mut self, o: Self) {
        self.n_gt += o.n_gt;
        self.tp += o.tp;
        self.fp += o.fp;
        self.fn_ += o.fn_;
        self.idsw += o.idsw;
        self.iou_sum += o.iou_sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClearReport {
    pub mota: f64,
    pub motp: f64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub idsw: u64,
    pub n_gt: u64,
    pub tp: u64,
}

impl From<ClearCounts> for ClearReport {
    fn from(c: ClearCounts) -> Self {
        let mota = 1.0 - (c.fn_ + c.fp + c.idsw) as f64 / c.n_gt.max(1) as f64;
        let motp = if c.tp > 0 { c.iou_sum / c.tp as f64 } else { 0.0 };
        Self {
            mota,
            motp,
            fp: c.fp,
            fn_: c.fn_,
            idsw: c.idsw,
            n_gt: c.n_gt,
            tp: c.tp,
        }
    }
}

/// MOTA / MOTP over frame-aligned ground truth and predictions.
///
/// Per frame, pairs matched in the previous frame are kept while their IoU
/// stays at or above `threshold`; the remaining objects are matched by
/// maximum total IoU among pairs at or above `threshold`. A ground-truth
/// identity whose matched prediction differs from its most recent match
/// counts one identity switch.
pub fn clear_metrics(gt: &[FrameObjects], pred: &[FrameObjects], threshold: f64) -> Result<ClearReport, MetricsError> {
    check_threshold(threshold)?;
    let data = SequenceData::from_frames(gt, pred)?;
    Ok(clear_counts(&data, threshold).into())
}

pub(crate) fn check_threshold(threshold: f64) -> Result<(), MetricsError> {
    if threshold > 0.0 && threshold < 1.0 {
        Ok(())
    } else {
        Err(MetricsError::Threshold(threshold))
    }
}

pub(crate) fn clear_counts(data: &SequenceData, threshold: f64) -> ClearCounts {
    let mut counts = ClearCounts::default();
    let mut previous: HashMap<usize, usize> = HashMap::new();
    let mut last_match: HashMap<usize, usize> = HashMap::new();

    for frame in &data.frames {
        let (n_gt, n_pred) = (frame.gt.len(), frame.pred.len());
        counts.n_gt += n_gt as u64;

        let mut row_taken = vec![false; n_gt];
        let mut col_taken = vec![false; n_pred];
        let mut matches: Vec<(usize, usize)> = Vec::new();

        for (g, &gid) in frame.gt.iter().enumerate() {
            let Some(&pid) = previous.get(&gid) else { continue };
            if let Some(p) = frame.pred.iter().position(|&x| x == pid) {
                if frame.sim(g, p) >= threshold {
                    row_taken[g] = true;
                    col_taken[p] = true;
                    matches.push((g, p));
                }
            }
        }

        let free_rows: Vec<usize> = (0..n_gt).filter(|&g| !row_taken[g]).collect();
        let free_cols: Vec<usize> = (0..n_pred).filter(|&p| !col_taken[p]).collect();
        if !free_rows.is_empty() && !free_cols.is_empty() {
            let sub = CostMatrix::from_fn(free_rows.len(), free_cols.len(), |r, c| {
                frame.sim(free_rows[r], free_cols[c])
            })
            .expect("IoU values are finite");
            for (r, c) in match_with_threshold(&sub, threshold).pairs {
                matches.push((free_rows[r], free_cols[c]));
            }
        }

        let mut current = HashMap::with_capacity(matches.len());
        for &(g, p) in &matches {
            let (gid, pid) = (frame.gt[g], frame.pred[p]);
            counts.tp += 1;
            counts.iou_sum += frame.sim(g, p);
            if last_match.get(&gid).is_some_and(|&prev| prev != pid) {
                counts.idsw += 1;
            }
            last_match.insert(gid, pid);
            current.insert(gid, pid);
        }
        counts.fn_ += (n_gt - matches.len()) as u64;
        counts.fp += (n_pred - matches.len()) as u64;
        previous = current;
    }
    counts
}
