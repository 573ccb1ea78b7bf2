use crate::assignment::iou;
use crate::mot_data::{Detection, Modality};

/// Cross-modal duplicate suppression for one frame.
///
/// Both lists are concatenated (visible first) and reduced by greedy
/// non-maximum suppression within each class: detections are visited by
/// descending score, each survivor suppresses every remaining same-class
/// detection with IoU ≥ `nms_threshold`. A survivor that suppressed a
/// detection of a different modality is relabelled [`Modality::F`]. Survivors
/// keep their score and appear in input order. Equal scores resolve by input
/// order.
pub fn merge_modal_detections(vis: &[Detection], ir: &[Detection], nms_threshold: f64) -> Vec<Detection> {
    let all: Vec<Detection> = vis.iter().chain(ir).copied().collect();
    let mut order: Vec<usize> = (0..all.len()).collect();
    order.sort_by(|&a, &b| all[b].score.total_cmp(&all[a].score).then(a.cmp(&b)));

    let mut suppressed = vec![false; all.len()];
    let mut survivor = vec![false; all.len()];
    let mut fused = vec![false; all.len()];
    for (rank, &i) in order.iter().enumerate() {
        if suppressed[i] {
            continue;
        }
        survivor[i] = true;
        for &j in &order[rank + 1..] {
            if suppressed[j] || all[j].class != all[i].class {
                continue;
            }
            if iou(&all[i].bbox, &all[j].bbox) >= nms_threshold {
                suppressed[j] = true;
                if all[j].modality != all[i].modality {
                    fused[i] = true;
                }
            }
        }
    }
    (0..all.len())
        .filter(|&i| survivor[i])
        .map(|i| {
            let mut d = all[i];
            if fused[i] {
                d.modality = Modality::F;
            }
            d
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::BBox;
    use crate::mot_data::ObjectClass;

    fn det(x: f64, score: f64, modality: Modality) -> Detection {
        Detection {
            frame: 1,
            bbox: BBox::new(x, 0.0, 10.0, 10.0),
            score,
            class: ObjectClass::ONE,
            modality,
        }
    }

    #[test]
    fn empty_visible_passes_infrared_through() {
        let ir = vec![det(0.0, 0.5, Modality::T), det(50.0, 0.9, Modality::T)];
        assert_eq!(merge_modal_detections(&[], &ir, 0.65), ir);
    }

    #[test]
    fn identical_pair_fuses() {
        let out = merge_modal_detections(&[det(0.0, 0.9, Modality::V)], &[det(0.0, 0.8, Modality::T)], 0.65);
        assert_eq!(out.len(), 1);
        assert_eq!(out[0].score, 0.9);
        assert_eq!(out[0].modality, Modality::F);
    }

    #[test]
    fn classes_do_not_suppress_each_other() {
        let mut b = det(0.0, 0.8, Modality::T);
        b.class = ObjectClass::TWO;
        let out = merge_modal_detections(&[det(0.0, 0.9, Modality::V)], &[b], 0.65);
        assert_eq!(out.len(), 2);
        assert_eq!(out[0].modality, Modality::V);
    }
}
