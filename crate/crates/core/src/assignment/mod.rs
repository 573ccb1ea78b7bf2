//! Box geometry and exact linear assignment, shared by the metrics and the
//! tracker.

mod geometry;
mod hungarian;

pub use geometry::{iou, iou_matrix, BBox};
pub use hungarian::{hungarian, match_with_threshold, max_weight_matching, Assignment, CostMatrix};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AssignmentError {
    #[error("matrix of {rows}x{cols} cannot hold {len} values")]
    Shape { rows: usize, cols: usize, len: usize },
    #[error("rows have different lengths")]
    Ragged,
    #[error("non-finite cost at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
}
