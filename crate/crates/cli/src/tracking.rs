use std::collections::BTreeMap;
use std::fs;
use std::io::ErrorKind;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use vtmot::metrics::{evaluate as score, render_machine, render_table, EvalOptions, Protocol};
use vtmot::mot_data::layout::{load_detections, load_sequence, read_meta};
use vtmot::mot_data::{
    detections_by_frame, parse_annotations, serialize_annotations, Detection, Modality, SequenceMeta, TrajectorySet,
};
use vtmot::tracker::{merge_modal_detections, track_sequence, TrackerConfig};

use crate::data::sequence_dirs;
use crate::output::{with_jobs, write_atomic};
use crate::{EvaluateArgs, Format, ProtocolArg, TrackArgs};

/// Result file of `meta` under `dir`, or `None` when there is none.
fn load_result(dir: &Path, meta: &SequenceMeta) -> Result<Option<TrajectorySet>> {
    let path = dir.join(format!("{}.txt", meta.name));
    let text = match fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
        Err(e) => return Err(e).with_context(|| path.display().to_string()),
    };
    let set = parse_annotations(&text, meta).with_context(|| path.display().to_string())?;
    Ok(Some(TrajectorySet::from_annotations(&set, true)))
}

pub fn evaluate(args: &EvaluateArgs) -> Result<bool> {
    let dataset = sequence_dirs(&args.gt)?
        .iter()
        .map(|d| load_sequence(d))
        .collect::<Result<Vec<_>, _>>()?;
    let mut results = BTreeMap::new();
    for (meta, _) in &dataset {
        if let Some(r) = load_result(&args.res, meta)? {
            results.insert(meta.name.clone(), r);
        }
    }
    let protocol = match args.protocol {
        ProtocolArg::One => Protocol::I,
        ProtocolArg::Two => Protocol::II,
    };
    let options = EvalOptions {
        threshold: args.threshold,
        jobs: usize::from(args.common.jobs),
    };
    let report = score(&dataset, &results, protocol, options)?;
    match args.common.format {
        Format::Table => print!("{}", render_table(&report)),
        Format::Machine => println!("{}", render_machine(&report)),
    }
    Ok(true)
}

/// Visible and fused detections on one side, infrared on the other, merged
/// per frame.
fn merged_frames(dets: &[Detection], n_frames: u32, nms_threshold: f64) -> Vec<Vec<Detection>> {
    detections_by_frame(dets, n_frames)
        .into_iter()
        .map(|frame| {
            let (ir, vis): (Vec<Detection>, Vec<Detection>) =
                frame.into_iter().partition(|d| d.modality == Modality::T);
            merge_modal_detections(&vis, &ir, nms_threshold)
        })
        .collect()
}

fn track_one(dir: &Path, out: &Path, config: TrackerConfig) -> Result<(String, TrajectorySet)> {
    let meta = read_meta(dir)?;
    let dets = load_detections(dir)?;
    let frames = merged_frames(&dets, meta.seq_length, config.nms_threshold);
    let tracks = track_sequence(&frames, config);
    let text = serialize_annotations(&tracks.to_annotations()?);
    write_atomic(&out.join(format!("{}.txt", meta.name)), text.as_bytes())?;
    Ok((meta.name, tracks))
}

pub fn track(args: &TrackArgs) -> Result<bool> {
    let mut config = TrackerConfig::default();
    if let Some(v) = args.iou_threshold {
        config.iou_threshold = v;
    }
    if let Some(v) = args.max_age {
        config.max_age = v;
    }
    if let Some(v) = args.score_birth {
        config.score_birth = v;
    }
    if let Some(v) = args.nms_threshold {
        config.nms_threshold = v;
    }
    let dirs = sequence_dirs(&args.dataset)?;
    fs::create_dir_all(&args.out).with_context(|| format!("create {}", args.out.display()))?;
    let done: Vec<Result<(String, TrajectorySet)>> = with_jobs(args.common.jobs, || {
        dirs.par_iter().map(|d| track_one(d, &args.out, config)).collect()
    })?;

    let mut ok = true;
    for (dir, outcome) in dirs.iter().zip(done) {
        match outcome {
            Ok((name, tracks)) => match args.common.format {
                Format::Table => println!("{name:<24} {:>6} tracks {:>8} boxes", tracks.len(), tracks.n_boxes()),
                Format::Machine => println!(
                    "{}",
                    serde_json::json!({"sequence": name, "tracks": tracks.len(), "boxes": tracks.n_boxes()})
                ),
            },
            Err(e) => {
                eprintln!("error: {}: {e:#}", dir.display());
                ok = false;
            }
        }
    }
    Ok(ok)
}
