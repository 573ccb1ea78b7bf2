//! CLEAR, identity and HOTA metrics with protocol-level pooling.

mod clear;
mod evaluate;
mod frames;
mod hota;
mod identity;
mod report;

pub use crate::mot_data::FrameObjects;
pub use clear::{clear_metrics, ClearCounts, ClearReport};
pub use evaluate::{
    evaluate, sequence_counts, EvalOptions, EvaluationReport, GroupReport, Headline, Protocol, SequenceCounts,
    SequenceMetrics,
};
pub use hota::{alphas, hota, AlphaScore, HotaCounts, HotaReport, N_ALPHAS};
pub use identity::{idf1, IdCounts, IdReport};
pub use report::{parse_machine, render_machine, render_table, COLUMNS};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("ground truth covers {gt_frames} frames but predictions cover {pred_frames}")]
    FrameMismatch { gt_frames: usize, pred_frames: usize },
    #[error("identity {id} appears twice in frame {frame}")]
    DuplicateId { frame: u32, id: u32 },
    #[error("IoU threshold {0} is outside (0, 1)")]
    Threshold(f64),
    #[error("no tracker results for: {}", .0.join(", "))]
    MissingResults(Vec<String>),
    #[error("{sequence}: prediction at frame {frame} beyond sequence length {seq_length}")]
    PredictionOutOfRange {
        sequence: String,
        frame: u32,
        seq_length: u32,
    },
    #[error("worker pool: {0}")]
    Pool(String),
}
