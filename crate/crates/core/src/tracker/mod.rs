//! SORT-style tracking-by-detection: constant-velocity Kalman prediction,
//! IoU association solved exactly, and a tentative/confirmed lifecycle.
//!
//! Detection-level merging of the visible and thermal streams is this
//! crate's own analogue of early fusion for a detector-free baseline.

mod kalman;
mod merge;
mod sort;

pub use kalman::{
    kalman_predict, kalman_update, measurement_noise, measurement_of, observation, process_noise, transition,
    KalmanParams, Measurement, StateCovariance, StateVector, TrackState, TrackStatus, MIN_SIZE,
};
pub use merge::merge_modal_detections;
pub use sort::{track_sequence, track_step, Emission, TrackerConfig, TrackerState};

use crate::assignment::BBox;
use crate::mot_data::ObjectClass;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TrackerError {
    #[error("detection class {detection:?} does not match track class {track:?}")]
    ClassMismatch { track: ObjectClass, detection: ObjectClass },
    #[error("measurement box {0:?} has no positive area")]
    DegenerateBox(BBox),
    #[error("innovation covariance is not positive definite")]
    SingularInnovation,
}
