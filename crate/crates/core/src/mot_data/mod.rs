//! Paired visible/infrared sequence format.

mod annotations;
mod detections;
pub mod layout;
mod seqinfo;
mod stats;
mod trajectory;
mod validate;

pub use annotations::{
    collapse_classes, parse_annotation_lines, parse_annotations, serialize_annotations, AnnotationRecord,
    AnnotationSet, ObjectClass,
};
pub use detections::{detections_by_frame, parse_detections, serialize_detections, Detection, Modality};
pub use layout::{DataError, SequencePair};
pub use seqinfo::{parse_seqinfo, Platform, SequenceMeta};
pub use stats::{
    average_length_s, dataset_stats, density, scale_bin, ClassCount, DatasetStats, SCALE_BIN_EDGES, SCALE_BIN_LABELS,
};
pub use trajectory::{FrameObjects, OrderError, Trajectory, TrajectorySet};
pub use validate::{validate_pair, validate_sequence, Issue, IssueKind, Severity, ValidationReport};

/// Problems found while reading seqinfo.ini, ground truth or detections.
/// Line numbers are 1-based; 0 means the problem is not tied to a line.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FormatError {
    #[error("missing required key '{0}'")]
    MissingKey(String),
    #[error("key '{key}' = '{value}': {reason}")]
    InvalidValue { key: String, value: String, reason: String },
    #[error("line {line}: expected {expected} columns, found {found}")]
    ColumnCount { line: usize, expected: usize, found: usize },
    #[error("line {line}: {field} '{value}' is not a valid number")]
    InvalidNumber {
        line: usize,
        field: &'static str,
        value: String,
    },
    #[error("line {line}: {field}: {reason}")]
    InvalidField {
        line: usize,
        field: &'static str,
        reason: String,
    },
    #[error("line {line}: class label {value} is not 1 or 2")]
    InvalidClass { line: usize, value: i64 },
    #[error("line {line}: duplicate record for frame {frame}, track {track_id}")]
    DuplicateRecord { line: usize, frame: u32, track_id: u32 },
    #[error("line {line}: frame {frame} exceeds sequence length {seq_length}")]
    FrameOutOfRange { line: usize, frame: u32, seq_length: u32 },
}
