use serde::{Deserialize, Serialize};

use super::kalman::{kalman_predict, kalman_update, KalmanParams, TrackState, TrackStatus};
use crate::assignment::{iou, match_with_threshold, BBox, CostMatrix};
use crate::mot_data::{Detection, ObjectClass, TrajectorySet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackerConfig {
    /// Minimum IoU between a predicted track box and a detection.
    pub iou_threshold: f64,
    /// Frames a confirmed track may go unmatched before it is dropped.
    pub max_age: u32,
    /// Detections below this score never start a track.
    pub score_birth: f64,
    /// IoU at which cross-modal duplicates are merged.
    pub nms_threshold: f64,
    pub kalman: KalmanParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            iou_threshold: 0.3,
            max_age: 30,
            score_birth: 0.4,
            nms_threshold: 0.65,
            kalman: KalmanParams::default(),
        }
    }
}

/// One box attributed to a confirmed identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Emission {
    pub id: u32,
    pub frame: u32,
    pub bbox: BBox,
    pub class: ObjectClass,
}

#[derive(Debug, Clone)]
struct LiveTrack {
    state: TrackState,
    /// Boxes matched while tentative, released on confirmation.
    pending: Vec<(u32, BBox)>,
}

/// Per-sequence tracker memory. Identities start at 1 and are never reused.
#[derive(Debug, Clone)]
pub struct TrackerState {
    pub config: TrackerConfig,
    tracks: Vec<LiveTrack>,
    next_id: u32,
    frame: u32,
}

impl TrackerState {
    pub fn new(config: TrackerConfig) -> Self {
        Self {
            config,
            tracks: Vec::new(),
            next_id: 1,
            frame: 0,
        }
    }

    /// Live tracks, tentative and confirmed.
    pub fn tracks(&self) -> impl Iterator<Item = &TrackState> {
        self.tracks.iter().map(|t| &t.state)
    }

    /// Number of frames processed so far.
    pub fn frame(&self) -> u32 {
        self.frame
    }
}

fn associate(tracks: &[&TrackState], dets: &[(usize, &Detection)], threshold: f64) -> Vec<(usize, usize)> {
    if tracks.is_empty() || dets.is_empty() {
        return Vec::new();
    }
    let predicted: Vec<BBox> = tracks.iter().map(|t| t.bbox()).collect();
    let sim = CostMatrix::from_fn(tracks.len(), dets.len(), |t, d| {
        if tracks[t].class == dets[d].1.class {
            iou(&predicted[t], &dets[d].1.bbox)
        } else {
            -1.0
        }
    })
    .expect("IoU values are finite");
    match_with_threshold(&sim, threshold).pairs
}

/// Advances the tracker by one frame.
///
/// Live tracks are predicted, then confirmed tracks are matched to the
/// detections by maximum total IoU (class-aware, IoU ≥ `iou_threshold`),
/// then tentative tracks are matched to what is left. A tentative track dies
/// on its first miss; a confirmed one after more than `max_age` misses.
/// Unmatched detections scoring at least `score_birth` start tentative
/// tracks. The result holds every confirmed track updated in this frame,
/// boxed by its matched detection; a track confirmed in this frame also
/// releases the boxes it collected while tentative.
pub fn track_step(state: &mut TrackerState, dets: &[Detection]) -> Vec<Emission> {
    state.frame += 1;
    let frame = state.frame;
    let cfg = state.config;
    for t in &mut state.tracks {
        t.state = kalman_predict(&t.state, &cfg.kalman);
    }

    let mut det_taken = vec![false; dets.len()];
    let mut matched_box: Vec<Option<BBox>> = vec![None; state.tracks.len()];
    for stage in [TrackStatus::Confirmed, TrackStatus::Tentative] {
        let idx: Vec<usize> = (0..state.tracks.len())
            .filter(|&k| state.tracks[k].state.status == stage)
            .collect();
        let free: Vec<(usize, &Detection)> = dets.iter().enumerate().filter(|(d, _)| !det_taken[*d]).collect();
        let candidates: Vec<&TrackState> = idx.iter().map(|&k| &state.tracks[k].state).collect();
        for (t, d) in associate(&candidates, &free, cfg.iou_threshold) {
            let (det_index, det) = free[d];
            det_taken[det_index] = true;
            matched_box[idx[t]] = Some(det.bbox);
        }
    }

    let mut out = Vec::new();
    for (t, m) in state.tracks.iter_mut().zip(&matched_box) {
        match m {
            Some(bbox) => {
                let was_tentative = t.state.status == TrackStatus::Tentative;
                t.state = kalman_update(&t.state, bbox, t.state.class, &cfg.kalman)
                    .expect("matched detections share the track class and have positive area");
                if t.state.status == TrackStatus::Confirmed {
                    if was_tentative {
                        out.extend(t.pending.drain(..).map(|(f, b)| Emission {
                            id: t.state.id,
                            frame: f,
                            bbox: b,
                            class: t.state.class,
                        }));
                    }
                    out.push(Emission {
                        id: t.state.id,
                        frame,
                        bbox: *bbox,
                        class: t.state.class,
                    });
                } else {
                    t.pending.push((frame, *bbox));
                }
            }
            None => {
                if t.state.status == TrackStatus::Tentative || t.state.time_since_update > cfg.max_age {
                    t.state.status = TrackStatus::Dead;
                }
            }
        }
    }
    state.tracks.retain(|t| t.state.status != TrackStatus::Dead);

    for (d, det) in dets.iter().enumerate() {
        if det_taken[d] || det.score < cfg.score_birth || !(det.bbox.w > 0.0 && det.bbox.h > 0.0) {
            continue;
        }
        let id = state.next_id;
        state.next_id += 1;
        let s = TrackState::from_detection(id, det.class, &det.bbox, &cfg.kalman);
        let mut pending = Vec::new();
        if s.status == TrackStatus::Confirmed {
            out.push(Emission {
                id,
                frame,
                bbox: det.bbox,
                class: det.class,
            });
        } else {
            pending.push((frame, det.bbox));
        }
        state.tracks.push(LiveTrack { state: s, pending });
    }
    out
}

/// Runs a fresh tracker over a whole sequence; element `k` of the input
/// holds the detections of frame `k + 1`.
pub fn track_sequence(per_frame_dets: &[Vec<Detection>], config: TrackerConfig) -> TrajectorySet {
    let mut state = TrackerState::new(config);
    let mut out = TrajectorySet::new();
    for dets in per_frame_dets {
        for e in track_step(&mut state, dets) {
            out.insert(e.id, e.frame, e.bbox, e.class)
                .expect("each identity emits at most one box per frame");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mot_data::Modality;

    fn det(x: f64, y: f64) -> Detection {
        Detection {
            frame: 0,
            bbox: BBox::new(x, y, 20.0, 40.0),
            score: 0.9,
            class: ObjectClass::ONE,
            modality: Modality::V,
        }
    }

    #[test]
    fn empty_input() {
        let mut s = TrackerState::new(TrackerConfig::default());
        assert!(track_step(&mut s, &[]).is_empty());
        assert_eq!(s.tracks().count(), 0);
        assert!(track_sequence(&[], TrackerConfig::default()).is_empty());
    }

    #[test]
    fn single_track_keeps_identity() {
        let frames: Vec<Vec<Detection>> = (0..10).map(|k| vec![det(10.0 + 2.0 * k as f64, 5.0)]).collect();
        let out = track_sequence(&frames, TrackerConfig::default());
        assert_eq!(out.len(), 1);
        let t = out.get(1).unwrap();
        assert_eq!(t.points.len(), 10);
        assert_eq!(t.points[9], (10, BBox::new(28.0, 5.0, 20.0, 40.0)));
    }

    #[test]
    fn low_score_detections_do_not_spawn() {
        let mut d = det(0.0, 0.0);
        d.score = 0.1;
        let out = track_sequence(&vec![vec![d]; 5], TrackerConfig::default());
        assert!(out.is_empty());
    }

    #[test]
    fn tentative_track_dies_on_miss() {
        let frames = vec![
            vec![det(0.0, 0.0)],
            vec![],
            vec![det(0.0, 0.0)],
            vec![det(0.0, 0.0)],
            vec![det(0.0, 0.0)],
        ];
        let out = track_sequence(&frames, TrackerConfig::default());
        assert_eq!(out.ids().collect::<Vec<_>>(), vec![2]);
    }
}
