//! The two-stage fusion module: previous-frame heatmap, convolutional token
//! embedding, temporal fusion per modality, then multimodal fusion through a
//! summed bridge feature.

mod embed;
mod heatmap;
mod model;
mod multimodal;
mod posenc;
mod temporal;

pub use embed::{
    embed_backward, embed_forward, embed_tokens, EmbedCache, EmbedParams, Image, StemParams, PATCH, STEM_KERNEL,
};
pub use heatmap::{render_heatmap, render_heatmap_with, HeatMap, ObjectCenter, SplatRule};
pub use model::{
    heatmap_for, pfm_backward, pfm_forward, pfm_forward_frames, pfm_trace, FrameImages, PfmConfig, PfmDocument,
    PfmGrads, PfmInputs, PfmParams, PfmProblem, PfmTape,
};
pub use multimodal::{
    multimodal_backward, multimodal_forward, multimodal_fusion, Branch, MultimodalCache, MultimodalGrads,
    MultimodalParams, Variant,
};
pub use posenc::{positional_encoding, PositionalEncoding};
pub use temporal::{
    temporal_backward, temporal_forward, temporal_fusion, TemporalCache, TemporalGrads, TemporalParams,
};
