use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, AnnotationSet, FormatError, ObjectClass};
use crate::assignment::BBox;

/// Boxes of one identity, strictly increasing in frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub class: ObjectClass,
    pub points: Vec<(u32, BBox)>,
}

/// Objects present in one frame, with identities unique within the frame.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrameObjects {
    pub frame: u32,
    pub entries: Vec<(u32, BBox)>,
}

/// Tracker output (or ground truth) grouped by identity.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrajectorySet {
    tracks: BTreeMap<u32, Trajectory>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("track {id}: frame {frame} does not follow frame {last}")]
pub struct OrderError {
    pub id: u32,
    pub frame: u32,
    pub last: u32,
}

impl TrajectorySet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a box to track `id`, creating it with `class` if new. Frames
    /// must strictly increase per track.
    pub fn push(&mut self, id: u32, frame: u32, bbox: BBox, class: ObjectClass) -> Result<(), OrderError> {
        let track = self.tracks.entry(id).or_insert_with(|| Trajectory {
            class,
            points: Vec::new(),
        });
        if let Some(&(last, _)) = track.points.last() {
            if frame <= last {
                return Err(OrderError { id, frame, last });
            }
        }
        track.points.push((frame, bbox));
        Ok(())
    }

    /// Inserts a box at any frame position, keeping the track sorted.
    pub fn insert(&mut self, id: u32, frame: u32, bbox: BBox, class: ObjectClass) -> Result<(), OrderError> {
        let track = self.tracks.entry(id).or_insert_with(|| Trajectory {
            class,
            points: Vec::new(),
        });
        match track.points.binary_search_by_key(&frame, |p| p.0) {
            Ok(_) => Err(OrderError { id, frame, last: frame }),
            Err(pos) => {
                track.points.insert(pos, (frame, bbox));
                Ok(())
            }
        }
    }

    pub fn get(&self, id: u32) -> Option<&Trajectory> {
        self.tracks.get(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &Trajectory)> {
        self.tracks.iter().map(|(&id, t)| (id, t))
    }

    pub fn ids(&self) -> impl Iterator<Item = u32> + '_ {
        self.tracks.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    /// Total number of boxes over all tracks.
    pub fn n_boxes(&self) -> usize {
        self.tracks.values().map(|t| t.points.len()).sum()
    }

    pub fn max_frame(&self) -> Option<u32> {
        self.tracks.values().filter_map(|t| t.points.last().map(|p| p.0)).max()
    }

    /// Drops the box of track `id` at `frame`, if present.
    pub fn remove_point(&mut self, id: u32, frame: u32) -> Option<BBox> {
        let track = self.tracks.get_mut(&id)?;
        let pos = track.points.binary_search_by_key(&frame, |p| p.0).ok()?;
        let (_, b) = track.points.remove(pos);
        if track.points.is_empty() {
            self.tracks.remove(&id);
        }
        Some(b)
    }

    /// Ground truth as trajectories. `valid = 0` records are skipped unless
    /// `include_invalid` is set.
    pub fn from_annotations(set: &AnnotationSet, include_invalid: bool) -> Self {
        let mut out = Self::new();
        for r in set.records() {
            if r.valid || include_invalid {
                // records are sorted by frame and unique per (frame, id)
                out.push(r.track_id, r.frame, r.bbox, r.class)
                    .expect("annotation set ordering");
            }
        }
        out
    }

    /// 9-column records (valid = 1, class as tracked).
    pub fn to_annotations(&self) -> Result<AnnotationSet, FormatError> {
        let records = self
            .tracks
            .iter()
            .flat_map(|(&id, t)| {
                t.points.iter().map(move |&(frame, bbox)| AnnotationRecord {
                    frame,
                    track_id: id,
                    bbox,
                    valid: true,
                    class: t.class,
                })
            })
            .collect();
        AnnotationSet::new(records)
    }

    /// Per-frame view over frames `1..=n_frames`, one entry per frame even if
    /// empty. Boxes past `n_frames` are ignored.
    pub fn frame_objects(&self, n_frames: u32) -> Vec<FrameObjects> {
        let mut frames: Vec<FrameObjects> = (1..=n_frames)
            .map(|frame| FrameObjects {
                frame,
                entries: Vec::new(),
            })
            .collect();
        for (&id, t) in &self.tracks {
            for &(frame, bbox) in &t.points {
                if frame >= 1 && frame <= n_frames {
                    frames[frame as usize - 1].entries.push((id, bbox));
                }
            }
        }
        frames
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn push_enforces_order() {
        let mut t = TrajectorySet::new();
        let b = BBox::new(0.0, 0.0, 1.0, 1.0);
        t.push(3, 1, b, ObjectClass::ONE).unwrap();
        t.push(3, 4, b, ObjectClass::ONE).unwrap();
        assert!(t.push(3, 4, b, ObjectClass::ONE).is_err());
        assert!(t.push(3, 2, b, ObjectClass::ONE).is_err());
        t.insert(3, 2, b, ObjectClass::ONE).unwrap();
        assert!(t.insert(3, 2, b, ObjectClass::ONE).is_err());
        let frames: Vec<u32> = t.get(3).unwrap().points.iter().map(|p| p.0).collect();
        assert_eq!(frames, vec![1, 2, 4]);
    }

    #[test]
    fn frame_view_and_annotation_round_trip() {
        let mut t = TrajectorySet::new();
        let b = BBox::new(1.0, 2.0, 3.0, 4.0);
        t.push(1, 1, b, ObjectClass::TWO).unwrap();
        t.push(1, 2, b, ObjectClass::TWO).unwrap();
        t.push(2, 2, b, ObjectClass::ONE).unwrap();
        let frames = t.frame_objects(3);
        assert_eq!(frames.len(), 3);
        assert_eq!(frames[1].entries.len(), 2);
        assert!(frames[2].entries.is_empty());
        let ann = t.to_annotations().unwrap();
        assert_eq!(ann.len(), 3);
        assert_eq!(TrajectorySet::from_annotations(&ann, false), t);
        assert_eq!(t.n_boxes(), 3);
        assert_eq!(t.max_frame(), Some(2));
    }
}
