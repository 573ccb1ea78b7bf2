use std::path::Path;

use serde::{Deserialize, Serialize};

use super::rng::SplitMix64;
use super::HarnessError;
use crate::assignment::BBox;
use crate::mot_data::layout::write_sequence_tree;
use crate::mot_data::{
    AnnotationRecord, AnnotationSet, DataError, Detection, Modality, ObjectClass, Platform, SequenceMeta, TrajectorySet,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Motion {
    /// Constant horizontal velocity, one lane per track.
    Linear,
    /// Pairs of tracks traverse a shared lane in opposite directions.
    Crossing,
    /// Fixed boxes on a grid.
    Stationary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub n_tracks: u32,
    pub n_frames: u32,
    pub motion: Motion,
    pub image_width: u32,
    pub image_height: u32,
    pub frame_rate: f64,
    /// Probability that a ground-truth box produces no detection.
    pub drop_rate: f64,
    /// Half-width of the uniform perturbation of each box coordinate.
    pub jitter_px: f64,
    /// Expected false-positive detections per frame.
    pub fp_rate: f64,
    /// Alternate the two object classes between lanes.
    pub mixed_classes: bool,
    pub seed: u64,
    pub platform: Platform,
}

impl ScenarioSpec {
    /// Clean scenario on a 640×512 image at 25 frames per second.
    pub fn new(name: impl Into<String>, n_tracks: u32, n_frames: u32, motion: Motion, seed: u64) -> Self {
        Self {
            name: name.into(),
            n_tracks,
            n_frames,
            motion,
            image_width: 640,
            image_height: 512,
            frame_rate: 25.0,
            drop_rate: 0.0,
            jitter_px: 0.0,
            fp_rate: 0.0,
            mixed_classes: false,
            seed,
            platform: Platform::Unknown,
        }
    }

    pub fn with_noise(mut self, drop_rate: f64, jitter_px: f64, fp_rate: f64) -> Self {
        self.drop_rate = drop_rate;
        self.jitter_px = jitter_px;
        self.fp_rate = fp_rate;
        self
    }

    pub fn with_platform(mut self, platform: Platform) -> Self {
        self.platform = platform;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |reason: &str| Err(HarnessError::InvalidSpec(reason.to_string()));
        if self.n_tracks == 0 || self.n_frames == 0 {
            return bad("n_tracks and n_frames must be positive");
        }
        if !(0.0..=1.0).contains(&self.drop_rate) {
            return bad("drop_rate must lie in [0, 1]");
        }
        if !(self.jitter_px >= 0.0 && self.jitter_px.is_finite()) {
            return bad("jitter_px must be finite and non-negative");
        }
        if !(self.fp_rate >= 0.0 && self.fp_rate.is_finite()) {
            return bad("fp_rate must be finite and non-negative");
        }
        if !(self.frame_rate > 0.0 && self.frame_rate.is_finite()) {
            return bad("frame_rate must be positive");
        }
        let layout = Layout::new(self);
        if layout.box_h < 4.0 || layout.box_w < 4.0 {
            return bad("image too small for the requested number of tracks");
        }
        if self.jitter_px * 2.0 >= layout.box_w.min(layout.box_h) {
            return bad("jitter_px must stay below half the box size");
        }
        Ok(())
    }
}

/// Height of the strip along the bottom edge where false positives land.
const FP_STRIP: f64 = 64.0;
const MARGIN: f64 = 8.0;

struct Layout {
    lane_h: f64,
    box_w: f64,
    box_h: f64,
}

impl Layout {
    fn new(spec: &ScenarioSpec) -> Self {
        let lanes = match spec.motion {
            Motion::Linear => spec.n_tracks,
            Motion::Crossing => spec.n_tracks.div_ceil(2),
            Motion::Stationary => spec.n_tracks.div_ceil(Self::columns(spec)),
        };
        let usable = spec.image_height as f64 - FP_STRIP - 2.0 * MARGIN;
        let lane_h = usable / lanes as f64;
        let box_h = (lane_h * 0.6).min(48.0).floor();
        Self {
            lane_h,
            box_w: (box_h / 2.0).floor(),
            box_h,
        }
    }

    fn columns(spec: &ScenarioSpec) -> u32 {
        ((spec.n_tracks as f64).sqrt().ceil() as u32).max(1)
    }
}

/// Ground-truth box of `track` (0-based) at `frame` (1-based).
fn gt_box(spec: &ScenarioSpec, layout: &Layout, track: u32, frame: u32) -> BBox {
    let (w, h) = (layout.box_w, layout.box_h);
    let t = (frame - 1) as f64;
    let span = spec.image_width as f64 - w - 2.0 * MARGIN;
    let travel = (spec.n_frames.max(2) - 1) as f64;
    let lane_top = |lane: u32| MARGIN + lane as f64 * layout.lane_h;
    match spec.motion {
        Motion::Linear => {
            let x0 = MARGIN + (track % 5) as f64 * 4.0;
            let speed = (1.0 + 0.5 * (track % 4) as f64).min((span - (x0 - MARGIN)) / travel);
            BBox::new(x0 + speed * t, lane_top(track), w, h)
        }
        Motion::Crossing => {
            let speed = span / travel;
            let lane = track / 2;
            if track % 2 == 0 {
                BBox::new(MARGIN + speed * t, lane_top(lane), w, h)
            } else {
                // offset vertically so the pair overlaps only partially
                BBox::new(MARGIN + span - speed * t, lane_top(lane) + 0.4 * h, w, h)
            }
        }
        Motion::Stationary => {
            let cols = Layout::columns(spec);
            let cell_w = span / cols as f64;
            BBox::new(MARGIN + (track % cols) as f64 * cell_w, lane_top(track / cols), w, h)
        }
    }
}

fn track_class(spec: &ScenarioSpec, track: u32) -> ObjectClass {
    let group = match spec.motion {
        Motion::Crossing => track / 2,
        _ => track,
    };
    if spec.mixed_classes && group % 2 == 1 {
        ObjectClass::TWO
    } else {
        ObjectClass::ONE
    }
}

/// A generated sequence with the bookkeeping needed by counting oracles.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSequence {
    pub spec: ScenarioSpec,
    pub meta: SequenceMeta,
    pub gt: AnnotationSet,
    /// Element `k` holds the detections of frame `k + 1`.
    pub detections: Vec<Vec<Detection>>,
    /// Parallel to `detections`: the ground-truth id a detection was derived
    /// from, `None` for false positives.
    pub sources: Vec<Vec<Option<u32>>>,
}

impl SyntheticSequence {
    pub fn all_detections(&self) -> Vec<Detection> {
        self.detections.iter().flatten().copied().collect()
    }

    pub fn dropped(&self) -> u64 {
        self.gt.len() as u64 - self.sources.iter().flatten().filter(|s| s.is_some()).count() as u64
    }

    pub fn false_positives(&self) -> u64 {
        self.sources.iter().flatten().filter(|s| s.is_none()).count() as u64
    }

    /// Frames (1-based) and ids of ground-truth boxes that produced no
    /// detection.
    pub fn dropped_boxes(&self) -> Vec<(u32, u32)> {
        let mut out = Vec::new();
        for r in self.gt.records() {
            let seen = self.sources[r.frame as usize - 1].contains(&Some(r.track_id));
            if !seen {
                out.push((r.frame, r.track_id));
            }
        }
        out
    }

    /// A perfect tracker's output: detections grouped by their source
    /// identity. Every false positive becomes its own one-frame track with an
    /// id above all ground-truth ids.
    pub fn oracle_tracks(&self) -> TrajectorySet {
        let mut out = TrajectorySet::new();
        let mut next_fp = self.spec.n_tracks + 1;
        for (k, (dets, srcs)) in self.detections.iter().zip(&self.sources).enumerate() {
            let frame = k as u32 + 1;
            for (d, s) in dets.iter().zip(srcs) {
                let id = s.unwrap_or_else(|| {
                    next_fp += 1;
                    next_fp - 1
                });
                out.push(id, frame, d.bbox, d.class)
                    .expect("one detection per source per frame");
            }
        }
        out
    }

    /// Writes seqinfo.ini, placeholder frames, ground truth and detections
    /// under `root`.
    pub fn write_tree(&self, root: &Path) -> Result<(), DataError> {
        write_sequence_tree(root, &self.meta, &self.gt, Some(&self.all_detections()))
    }
}

/// Builds ground truth from the motion model and derives detections from it.
///
/// Random draws happen in a fixed order. For every frame, each ground-truth
/// box in id order consumes six uniforms: one drop decision, four jitter
/// offsets (x, y, w, h) and one score in `[0.5, 1)`. Then one uniform decides
/// whether the fractional part of `fp_rate` adds a false positive, and each
/// false positive consumes three uniforms (x, y, score). Drawing is the same
/// whether or not a box is dropped, so the dropped set depends only on the
/// seed and the drop rate.
pub fn generate_synthetic_sequence(spec: &ScenarioSpec) -> Result<SyntheticSequence, HarnessError> {
    spec.validate()?;
    let layout = Layout::new(spec);
    let meta = SequenceMeta::new(
        spec.name.clone(),
        spec.frame_rate,
        spec.n_frames,
        spec.image_width,
        spec.image_height,
    )
    .with_platform(spec.platform);

    let mut rng = SplitMix64::new(spec.seed);
    let mut records = Vec::new();
    let mut detections = Vec::with_capacity(spec.n_frames as usize);
    let mut sources = Vec::with_capacity(spec.n_frames as usize);
    let whole_fp = spec.fp_rate.floor() as u64;
    let frac_fp = spec.fp_rate - spec.fp_rate.floor();
    let fp_top = spec.image_height as f64 - FP_STRIP;
    let j = spec.jitter_px;

    for frame in 1..=spec.n_frames {
        let mut dets = Vec::new();
        let mut srcs = Vec::new();
        for track in 0..spec.n_tracks {
            let id = track + 1;
            let class = track_class(spec, track);
            let b = gt_box(spec, &layout, track, frame);
            records.push(AnnotationRecord {
                frame,
                track_id: id,
                bbox: b,
                valid: true,
                class,
            });
            let dropped = rng.next_f64() < spec.drop_rate;
            let mut offsets = [0.0; 4];
            for o in &mut offsets {
                *o = rng.uniform(-j, j);
            }
            let score = rng.uniform(0.5, 1.0);
            if !dropped {
                let bbox = if j > 0.0 {
                    BBox::new(b.x + offsets[0], b.y + offsets[1], b.w + offsets[2], b.h + offsets[3])
                } else {
                    b
                };
                dets.push(Detection {
                    frame,
                    bbox,
                    score,
                    class,
                    modality: Modality::V,
                });
                srcs.push(Some(id));
            }
        }
        let n_fp = whole_fp + u64::from(rng.next_f64() < frac_fp);
        for _ in 0..n_fp {
            let x = rng.uniform(0.0, spec.image_width as f64 - layout.box_w);
            let y = rng.uniform(fp_top, spec.image_height as f64 - layout.box_h.min(FP_STRIP));
            let score = rng.next_f64();
            dets.push(Detection {
                frame,
                bbox: BBox::new(x, y, layout.box_w, layout.box_h.min(FP_STRIP)),
                score,
                class: ObjectClass::ONE,
                modality: Modality::V,
            });
            srcs.push(None);
        }
        detections.push(dets);
        sources.push(srcs);
    }
    let gt = AnnotationSet::new(records).expect("generated ids are unique per frame");
    Ok(SyntheticSequence {
        spec: spec.clone(),
        meta,
        gt,
        detections,
        sources,
    })
}

/// Ground-truth, miss and false-positive totals that a perfect tracker run
/// on the realized detections must produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpectedCounts {
    pub n_gt: u64,
    pub fn_: u64,
    pub fp: u64,
}

/// Counting oracle for [`SyntheticSequence::oracle_tracks`]. Fails when the
/// jitter could push a surviving detection below IoU 0.5 with its source.
pub fn expected_counts(spec: &ScenarioSpec, seq: &SyntheticSequence) -> Result<ExpectedCounts, HarnessError> {
    spec.validate()?;
    let layout = Layout::new(spec);
    let (w, h, j) = (layout.box_w, layout.box_h, spec.jitter_px);
    // worst case: intersection shrinks to (w-2j)(h-2j) while the detection
    // grows to (w+j)(h+j); IoU >= 0.5 iff 3·inter >= area_gt + area_det
    let inter = (w - 2.0 * j) * (h - 2.0 * j);
    if 3.0 * inter < w * h + (w + j) * (h + j) {
        return Err(HarnessError::JitterTooLarge {
            jitter_px: j,
            box_w: w,
            box_h: h,
        });
    }
    Ok(ExpectedCounts {
        n_gt: seq.gt.len() as u64,
        fn_: seq.dropped(),
        fp: seq.false_positives(),
    })
}
