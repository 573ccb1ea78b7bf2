//! Visible-thermal multi-object tracking toolkit.
//!
//! * [`mot_data`]: the paired-sequence dataset format (seqinfo.ini, 9-column
//!   ground truth, detections), validation and dataset statistics.
//! * [`assignment`]: IoU geometry and exact linear assignment.
//! * [`metrics`]: CLEAR (MOTA/MOTP), IDF1 and HOTA with per-platform
//!   protocol aggregation.
//! * [`tracker`]: SORT-style Kalman + Hungarian baseline with cross-modal
//!   detection merging.
//! * [`harness`]: seeded synthetic scenarios with exact counting oracles.

pub mod assignment;
pub mod harness;
pub mod metrics;
pub mod mot_data;
pub mod tracker;

pub use assignment::BBox;
