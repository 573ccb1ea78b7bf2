use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnnotationSet, SequenceMeta};

/// Upper bounds (inclusive) of the first five box-area bins, in px².
/// The sixth bin is open-ended: (96², ∞).
pub const SCALE_BIN_EDGES: [f64; 5] = [11.0 * 11.0, 22.0 * 22.0, 32.0 * 32.0, 64.0 * 64.0, 96.0 * 96.0];

pub const SCALE_BIN_LABELS: [&str; 6] = [
    "(0,11x11]",
    "(11x11,22x22]",
    "(22x22,32x32]",
    "(32x32,64x64]",
    "(64x64,96x96]",
    "(96x96,inf)",
];

/// 1-based scale bin of a box area; intervals are left-open, right-closed.
pub fn scale_bin(area: f64) -> usize {
    SCALE_BIN_EDGES.iter().position(|&edge| area <= edge).unwrap_or(5) + 1
}

/// Boxes per frame; `None` without frames.
pub fn density(n_boxes: u64, n_frames: u64) -> Option<f64> {
    (n_frames > 0).then(|| n_boxes as f64 / n_frames as f64)
}

/// Mean sequence duration in seconds at a uniform frame rate.
pub fn average_length_s(n_frames: u64, frame_rate: f64, n_videos: u64) -> Option<f64> {
    (n_videos > 0 && frame_rate > 0.0).then(|| n_frames as f64 / frame_rate / n_videos as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClassCount {
    pub ids: u64,
    pub boxes: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DatasetStats {
    pub n_videos: u64,
    pub n_frames: u64,
    pub n_tracks: u64,
    pub n_boxes: u64,
    /// Boxes per frame, `None` for an empty dataset.
    pub density: Option<f64>,
    /// Mean duration in seconds, `None` for an empty dataset.
    pub avg_length_s: Option<f64>,
    pub scale_histogram: [u64; 6],
    /// Per class label: distinct identities and boxes.
    pub class_counts: BTreeMap<u8, ClassCount>,
}

impl DatasetStats {
    /// Small (first three bins), mid (next two) and large (last) box totals.
    pub fn scale_groups(&self) -> [u64; 3] {
        let h = &self.scale_histogram;
        [h[0] + h[1] + h[2], h[3] + h[4], h[5]]
    }
}

/// Dataset-level counts. Every annotated record counts as a box regardless of
/// its validity flag; track identities are counted per sequence.
pub fn dataset_stats<'a, I>(sequences: I) -> DatasetStats
where
    I: IntoIterator<Item = (&'a SequenceMeta, &'a AnnotationSet)>,
{
    let mut stats = DatasetStats::default();
    let mut total_duration = 0.0;
    for (meta, set) in sequences {
        stats.n_videos += 1;
        stats.n_frames += u64::from(meta.seq_length);
        total_duration += meta.duration_s();
        let mut ids = BTreeSet::new();
        let mut class_ids = BTreeSet::new();
        for r in set.records() {
            stats.n_boxes += 1;
            ids.insert(r.track_id);
            class_ids.insert((r.class.get(), r.track_id));
            stats.scale_histogram[scale_bin(r.bbox.area()) - 1] += 1;
            stats.class_counts.entry(r.class.get()).or_default().boxes += 1;
        }
        stats.n_tracks += ids.len() as u64;
        for (class, _) in class_ids {
            stats.class_counts.entry(class).or_default().ids += 1;
        }
    }
    stats.density = density(stats.n_boxes, stats.n_frames);
    stats.avg_length_s = (stats.n_videos > 0).then(|| total_duration / stats.n_videos as f64);
    stats
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assignment::BBox;
    use crate::mot_data::{AnnotationRecord, ObjectClass};

    #[test]
    fn reported_dataset_totals() {
        let d = density(3_994_777, 401_068).unwrap();
        assert!((d - 9.96).abs() <= 0.01, "{d}");
        let len = average_length_s(401_068, 25.0, 582).unwrap();
        assert!((len - 27.57).abs() <= 0.01, "{len}");
    }

    #[test]
    fn bin_edges_are_right_closed() {
        assert_eq!(scale_bin(900.0), 3);
        for (k, edge) in SCALE_BIN_EDGES.iter().enumerate() {
            assert_eq!(scale_bin(*edge), k + 1);
            assert_eq!(scale_bin(edge + 1e-9), k + 2);
        }
        assert_eq!(scale_bin(1e-6), 1);
        assert_eq!(scale_bin(1e9), 6);
    }

    #[test]
    fn empty_input() {
        let stats = dataset_stats(std::iter::empty());
        assert_eq!(stats.n_boxes, 0);
        assert_eq!(stats.density, None);
        assert_eq!(stats.avg_length_s, None);
    }

    #[test]
    fn counts_over_sequences() {
        let rec = |frame, id, side: f64, class| AnnotationRecord {
            frame,
            track_id: id,
            bbox: BBox::new(0.0, 0.0, side, side),
            valid: true,
            class,
        };
        let a = AnnotationSet::new(vec![
            rec(1, 1, 10.0, ObjectClass::ONE),
            rec(2, 1, 30.0, ObjectClass::ONE),
            rec(1, 2, 100.0, ObjectClass::TWO),
        ])
        .unwrap();
        let b = AnnotationSet::new(vec![rec(1, 1, 32.0, ObjectClass::ONE)]).unwrap();
        let ma = SequenceMeta::new("a", 25.0, 50, 640, 480);
        let mb = SequenceMeta::new("b", 25.0, 25, 640, 480);
        let stats = dataset_stats([(&ma, &a), (&mb, &b)]);
        assert_eq!(stats.n_videos, 2);
        assert_eq!(stats.n_frames, 75);
        assert_eq!(stats.n_tracks, 3);
        assert_eq!(stats.n_boxes, 4);
        assert_eq!(stats.density, Some(4.0 / 75.0));
        assert_eq!(stats.avg_length_s, Some(1.5));
        assert_eq!(stats.scale_histogram, [1, 0, 2, 0, 0, 1]);
        assert_eq!(stats.scale_groups(), [3, 0, 1]);
        assert_eq!(stats.class_counts[&1], ClassCount { ids: 2, boxes: 3 });
        assert_eq!(stats.class_counts[&2], ClassCount { ids: 1, boxes: 1 });
    }
}
