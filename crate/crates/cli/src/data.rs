use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use rayon::prelude::*;
use serde_json::json;
use vtmot::harness::{generate_synthetic_sequence, Motion, ScenarioSpec};
use vtmot::mot_data::layout::{list_sequences, load_dataset, SEQINFO_FILE};
use vtmot::mot_data::{
    average_length_s, dataset_stats, density, scale_bin, serialize_annotations, validate_sequence, DatasetStats,
    Platform, Severity, ValidationReport, SCALE_BIN_LABELS,
};

use crate::output::{with_jobs, write_atomic};
use crate::{Format, GenArgs, MotionArg, StatsArgs, ValidateArgs};

/// The sequence directories named by `path`: itself when it holds a
/// seqinfo.ini, otherwise its sequence subdirectories.
pub fn sequence_dirs(path: &Path) -> Result<Vec<PathBuf>> {
    if path.join(SEQINFO_FILE).is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    let dirs = list_sequences(path)?;
    if dirs.is_empty() {
        bail!(
            "no sequences (directories with {SEQINFO_FILE}) under {}",
            path.display()
        );
    }
    Ok(dirs)
}

fn dir_name(path: &Path) -> String {
    path.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

pub fn validate(args: &ValidateArgs) -> Result<bool> {
    let dirs = sequence_dirs(&args.dataset)?;
    let reports: Vec<(String, ValidationReport)> = with_jobs(args.common.jobs, || {
        dirs.par_iter().map(|d| (dir_name(d), validate_sequence(d))).collect()
    })?;
    let all_valid = reports.iter().all(|(_, r)| r.is_valid());

    match args.common.format {
        Format::Machine => {
            let doc: BTreeMap<_, _> = reports.into_iter().collect();
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Format::Table => {
            let mut out = String::new();
            let n_valid = reports.iter().filter(|(_, r)| r.is_valid()).count();
            for (name, r) in &reports {
                let errors = r.issues.iter().filter(|i| i.severity == Severity::Error).count();
                let warnings = r.issues.len() - errors;
                let verdict = if r.is_valid() { "OK" } else { "INVALID" };
                let _ = writeln!(out, "{name:<24} {verdict:<8} {errors} errors, {warnings} warnings");
                for issue in &r.issues {
                    let _ = writeln!(out, "  {issue}");
                }
            }
            let _ = writeln!(out, "{n_valid}/{} sequences valid", reports.len());
            print!("{out}");
        }
    }
    Ok(all_valid)
}

pub fn stats(args: &StatsArgs) -> Result<bool> {
    let (stats, counts_only) = match (&args.dataset, args.frames) {
        (Some(root), _) => {
            let sequences = load_dataset(root)?;
            if sequences.is_empty() {
                bail!("no sequences under {}", root.display());
            }
            (dataset_stats(sequences.iter().map(|(m, a)| (m, a))), false)
        }
        (None, Some(n_frames)) => {
            let n_boxes = args.boxes.context("--boxes is required with --frames")?;
            let n_videos = args.videos.context("--videos is required with --frames")?;
            if !(args.frame_rate > 0.0) {
                bail!("--frame-rate must be positive");
            }
            let stats = DatasetStats {
                n_videos,
                n_frames,
                n_boxes,
                density: density(n_boxes, n_frames),
                avg_length_s: average_length_s(n_frames, args.frame_rate, n_videos),
                ..DatasetStats::default()
            };
            (stats, true)
        }
        (None, None) => bail!("give --dataset or --frames/--boxes/--videos"),
    };
    for a in &args.areas {
        if !(*a > 0.0 && a.is_finite()) {
            bail!("box area {a} is not a positive number");
        }
    }
    let bins: Vec<(f64, usize)> = args.areas.iter().map(|&a| (a, scale_bin(a))).collect();

    match args.common.format {
        Format::Machine => {
            let areas: Vec<_> = bins.iter().map(|(a, b)| json!({"area": a, "bin": b})).collect();
            let doc = json!({"stats": stats, "areas": areas});
            println!("{}", serde_json::to_string_pretty(&doc)?);
        }
        Format::Table => print!("{}", render_stats(&stats, counts_only, &bins)),
    }
    Ok(true)
}

fn render_stats(s: &DatasetStats, counts_only: bool, bins: &[(f64, usize)]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.2}"));
    let mut out = String::new();
    let _ = writeln!(out, "# Dataset");
    let _ = writeln!(
        out,
        "{:>8} {:>10} {:>8} {:>10} {:>10} {:>12}",
        "Videos", "Frames", "Tracks", "Boxes", "Density", "AvgLength(s)"
    );
    let tracks = if counts_only {
        "-".to_string()
    } else {
        s.n_tracks.to_string()
    };
    let _ = writeln!(
        out,
        "{:>8} {:>10} {:>8} {:>10} {:>10} {:>12}",
        s.n_videos,
        s.n_frames,
        tracks,
        s.n_boxes,
        opt(s.density),
        opt(s.avg_length_s)
    );
    if !counts_only {
        let _ = writeln!(out, "\n# Classes");
        let _ = writeln!(out, "{:>6} {:>8} {:>10}", "Class", "IDs", "Boxes");
        for (class, c) in &s.class_counts {
            let _ = writeln!(out, "{class:>6} {:>8} {:>10}", c.ids, c.boxes);
        }
        let _ = writeln!(out, "\n# Object scales");
        let share = |n: u64| {
            if s.n_boxes == 0 {
                "-".to_string()
            } else {
                format!("{:.2}%", 100.0 * n as f64 / s.n_boxes as f64)
            }
        };
        for (label, n) in SCALE_BIN_LABELS.iter().zip(s.scale_histogram) {
            let _ = writeln!(out, "{label:<16} {n:>10} {:>8}", share(n));
        }
        let [small, mid, large] = s.scale_groups();
        for (label, n) in [("small", small), ("medium", mid), ("large", large)] {
            let _ = writeln!(out, "{label:<16} {n:>10} {:>8}", share(n));
        }
    }
    if !bins.is_empty() {
        let _ = writeln!(out, "\n# Area bins");
        for (area, bin) in bins {
            let _ = writeln!(out, "{area:>12} -> bin {bin} {}", SCALE_BIN_LABELS[bin - 1]);
        }
    }
    out
}

/// `handheld=58,surveillance=40,uav=22` in the order given.
fn parse_platform_mix(text: &str) -> Result<Vec<(Platform, u32)>> {
    text.split(',')
        .filter(|part| !part.trim().is_empty())
        .map(|part| {
            let (name, count) = part
                .split_once('=')
                .with_context(|| format!("'{part}' is not platform=count"))?;
            let platform: Platform = name.parse().map_err(anyhow::Error::msg)?;
            let count: u32 = count.trim().parse().with_context(|| format!("bad count in '{part}'"))?;
            Ok((platform, count))
        })
        .collect()
}

pub fn gen(args: &GenArgs) -> Result<bool> {
    let mix = match &args.platform_mix {
        Some(text) => parse_platform_mix(text)?,
        None => Vec::new(),
    };
    let mix_total: u32 = mix.iter().map(|(_, n)| n).sum();
    let n = match (args.sequences, mix.is_empty()) {
        (Some(n), true) => n,
        (None, false) => mix_total,
        (Some(n), false) if n == mix_total => n,
        (Some(n), false) => bail!("--sequences {n} disagrees with the platform mix total {mix_total}"),
        (None, true) => bail!("give --sequences or --platform-mix"),
    };
    if n == 0 {
        bail!("nothing to generate");
    }
    let platforms: Vec<Platform> = if mix.is_empty() {
        vec![Platform::Unknown; n as usize]
    } else {
        mix.iter()
            .flat_map(|&(p, k)| std::iter::repeat(p).take(k as usize))
            .collect()
    };
    let motion = match args.motion {
        MotionArg::Linear => Motion::Linear,
        MotionArg::Crossing => Motion::Crossing,
        MotionArg::Stationary => Motion::Stationary,
    };

    fs::create_dir_all(&args.out).with_context(|| format!("create {}", args.out.display()))?;
    if let Some(res) = &args.oracle_results {
        fs::create_dir_all(res).with_context(|| format!("create {}", res.display()))?;
    }
    for (k, platform) in platforms.into_iter().enumerate() {
        let name = format!("seq{:04}", k + 1);
        let spec = ScenarioSpec::new(&name, args.tracks, args.frames, motion, args.seed + k as u64)
            .with_noise(args.drop_rate, args.jitter, args.fp_rate)
            .with_platform(platform);
        let seq = generate_synthetic_sequence(&spec)?;
        seq.write_tree(&args.out.join(&name))?;
        if let Some(res) = &args.oracle_results {
            let text = serialize_annotations(&seq.oracle_tracks().to_annotations()?);
            write_atomic(&res.join(format!("{name}.txt")), text.as_bytes())?;
        }
    }
    println!("wrote {n} sequences to {}", args.out.display());
    Ok(true)
}
