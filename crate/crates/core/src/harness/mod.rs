//! Seeded synthetic scenarios for end-to-end checks of the tracker and the
//! metrics, with exact counting oracles.

mod rng;
mod scenario;

pub use rng::SplitMix64;
pub use scenario::{
    expected_counts, generate_synthetic_sequence, ExpectedCounts, Motion, ScenarioSpec, SyntheticSequence,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("jitter {jitter_px}px cannot guarantee IoU 0.5 for {box_w}x{box_h} boxes")]
    JitterTooLarge { jitter_px: f64, box_w: f64, box_h: f64 },
}
