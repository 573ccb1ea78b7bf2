use nalgebra::{SMatrix, SVector};
use serde::{Deserialize, Serialize};

use super::TrackerError;
use crate::assignment::BBox;
use crate::mot_data::ObjectClass;

pub type StateVector = SVector<f64, 8>;
pub type StateCovariance = SMatrix<f64, 8, 8>;
pub type Measurement = SVector<f64, 4>;

/// Smallest width/height a state may carry after clamping.
pub const MIN_SIZE: f64 = 1e-3;

/// Noise model of the constant-velocity filter. Standard deviations scale
/// with the box size: position-like components use `std_weight_position`
/// times the box height (width for the width component), velocities use
/// `std_weight_velocity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KalmanParams {
    pub std_weight_position: f64,
    pub std_weight_velocity: f64,
    /// Multiplier on the measurement standard deviations.
    pub measurement_scale: f64,
    /// Consecutive updates needed before a track is confirmed.
    pub min_hits: u32,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self {
            std_weight_position: 1.0 / 20.0,
            std_weight_velocity: 1.0 / 160.0,
            measurement_scale: 1.0,
            min_hits: 3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackStatus {
    Tentative,
    Confirmed,
    Dead,
}

/// Filter state of one track: mean `(cx, cy, w, h, vcx, vcy, vw, vh)` in
/// pixels and pixels per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackState {
    pub id: u32,
    pub class: ObjectClass,
    pub mean: StateVector,
    pub covariance: StateCovariance,
    /// Frames since birth.
    pub age: u32,
    pub time_since_update: u32,
    /// Consecutive updates without a missed frame.
    pub hits: u32,
    pub status: TrackStatus,
}

/// Constant-velocity transition: every position component advances by its
/// velocity.
pub fn transition() -> StateCovariance {
    let mut f = StateCovariance::identity();
    for k in 0..4 {
        f[(k, k + 4)] = 1.0;
    }
    f
}

/// Selects `(cx, cy, w, h)` from the state.
pub fn observation() -> SMatrix<f64, 4, 8> {
    let mut h = SMatrix::<f64, 4, 8>::zeros();
    for k in 0..4 {
        h[(k, k)] = 1.0;
    }
    h
}

fn size_stds(mean: &StateVector, weight: f64) -> [f64; 4] {
    let (w, h) = (mean[2], mean[3]);
    [weight * h, weight * h, weight * w, weight * h]
}

/// Diagonal process noise for a state with the given mean.
pub fn process_noise(mean: &StateVector, p: &KalmanParams) -> StateCovariance {
    let pos = size_stds(mean, p.std_weight_position);
    let vel = size_stds(mean, p.std_weight_velocity);
    let mut q = StateCovariance::zeros();
    for k in 0..4 {
        q[(k, k)] = pos[k] * pos[k];
        q[(k + 4, k + 4)] = vel[k] * vel[k];
    }
    q
}

/// Diagonal measurement noise for a state with the given mean.
pub fn measurement_noise(mean: &StateVector, p: &KalmanParams) -> SMatrix<f64, 4, 4> {
    let std = size_stds(mean, p.std_weight_position * p.measurement_scale);
    let mut r = SMatrix::<f64, 4, 4>::zeros();
    for k in 0..4 {
        r[(k, k)] = std[k] * std[k];
    }
    r
}

pub fn measurement_of(b: &BBox) -> Measurement {
    let (cx, cy) = b.center();
    Measurement::new(cx, cy, b.w, b.h)
}

fn symmetrize(p: &mut StateCovariance) {
    *p = (*p + p.transpose()) * 0.5;
}

fn clamp_size(mean: &mut StateVector) {
    mean[2] = mean[2].max(MIN_SIZE);
    mean[3] = mean[3].max(MIN_SIZE);
}

impl TrackState {
    /// A new tentative track centred on `bbox` with zero velocity.
    pub fn from_detection(id: u32, class: ObjectClass, bbox: &BBox, p: &KalmanParams) -> Self {
        let z = measurement_of(bbox);
        let mean = StateVector::from_iterator(z.iter().copied().chain([0.0; 4]));
        let pos = size_stds(&mean, 2.0 * p.std_weight_position);
        let vel = size_stds(&mean, 10.0 * p.std_weight_velocity);
        let mut covariance = StateCovariance::zeros();
        for k in 0..4 {
            covariance[(k, k)] = pos[k] * pos[k];
            covariance[(k + 4, k + 4)] = vel[k] * vel[k];
        }
        Self {
            id,
            class,
            mean,
            covariance,
            age: 0,
            time_since_update: 0,
            hits: 1,
            status: if p.min_hits <= 1 {
                TrackStatus::Confirmed
            } else {
                TrackStatus::Tentative
            },
        }
    }

    /// Box described by the current mean.
    pub fn bbox(&self) -> BBox {
        BBox::from_center(self.mean[0], self.mean[1], self.mean[2], self.mean[3])
    }
}

/// One constant-velocity step. A track that already missed the previous
/// frame loses its hit streak.
pub fn kalman_predict(s: &TrackState, p: &KalmanParams) -> TrackState {
    let f = transition();
    let mut next = s.clone();
    next.mean = f * s.mean;
    clamp_size(&mut next.mean);
    next.covariance = f * s.covariance * f.transpose() + process_noise(&s.mean, p);
    symmetrize(&mut next.covariance);
    next.age += 1;
    if next.time_since_update > 0 {
        next.hits = 0;
    }
    next.time_since_update += 1;
    next
}

/// Linear update with the box of a same-class detection.
pub fn kalman_update(
    s: &TrackState,
    bbox: &BBox,
    class: ObjectClass,
    p: &KalmanParams,
) -> Result<TrackState, TrackerError> {
    if class != s.class {
        return Err(TrackerError::ClassMismatch {
            track: s.class,
            detection: class,
        });
    }
    if !(bbox.is_finite() && bbox.w > 0.0 && bbox.h > 0.0) {
        return Err(TrackerError::DegenerateBox(*bbox));
    }
    let h = observation();
    let innovation_cov = h * s.covariance * h.transpose() + measurement_noise(&s.mean, p);
    let chol = innovation_cov.cholesky().ok_or(TrackerError::SingularInnovation)?;
    // K = P Hᵀ S⁻¹, computed as (S⁻¹ H P)ᵀ with S symmetric
    let gain = chol.solve(&(h * s.covariance)).transpose();
    let innovation = measurement_of(bbox) - h * s.mean;

    let mut next = s.clone();
    next.mean = s.mean + gain * innovation;
    clamp_size(&mut next.mean);
    next.covariance = (StateCovariance::identity() - gain * h) * s.covariance;
    symmetrize(&mut next.covariance);
    next.time_since_update = 0;
    next.hits += 1;
    if next.status == TrackStatus::Tentative && next.hits >= p.min_hits {
        next.status = TrackStatus::Confirmed;
    }
    Ok(next)
}
