use std::fs;
use std::path::Path;

use anyhow::{bail, Context, Result};
use image::{GrayImage, RgbImage};
use serde_json::json;
use vtmot::harness::SplitMix64;
use vtmot::mot_data::{parse_detections, serialize_detections, Detection, Modality, ObjectClass};
use vtmot::BBox;
use vtmot_pfm::core::{grad_check, AttentionProblem, FfnProblem, GradReport, LayerNormProblem, SoftmaxProblem};
use vtmot_pfm::fusion::{pfm_trace, FrameImages, Image, ObjectCenter, PfmConfig, PfmInputs, PfmParams, PfmProblem};

use crate::output::write_atomic;
use crate::{CheckArgs, Format, GradcheckArgs, PfmDemoArgs, Target};

const PARAMS_FILE: &str = "params.json";
const OBJECTS_FILE: &str = "prev_objects.txt";
const FRAME_FILES: [&str; 4] = ["vis_t.png", "vis_prev.png", "ir_t.png", "ir_prev.png"];

fn read_image(path: &Path, config: &PfmConfig) -> Result<Image> {
    let decoded = image::open(path).with_context(|| path.display().to_string())?;
    let (w, h) = (decoded.width() as usize, decoded.height() as usize);
    if (h, w) != (config.image_height, config.image_width) {
        bail!(
            "{} is {h}x{w}, the parameters expect {}x{}",
            path.display(),
            config.image_height,
            config.image_width
        );
    }
    // channel-major planes scaled to [0, 1]
    let data: Vec<f64> = match config.image_channels {
        1 => decoded.to_luma8().pixels().map(|p| f64::from(p.0[0]) / 255.0).collect(),
        3 => {
            let rgb = decoded.to_rgb8();
            (0..3)
                .flat_map(|c| rgb.pixels().map(move |p| f64::from(p.0[c]) / 255.0))
                .collect()
        }
        n => bail!("{n}-channel frames cannot be stored as PNG"),
    };
    Ok(Image::new(config.image_channels, h, w, data)?)
}

fn write_image(path: &Path, img: &Image) -> Result<()> {
    let (w, h) = (img.width as u32, img.height as u32);
    let byte = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
    match img.channels {
        1 => GrayImage::from_raw(w, h, img.data.iter().map(|&v| byte(v)).collect())
            .context("image buffer size")?
            .save(path)?,
        3 => {
            let plane = img.width * img.height;
            let interleaved = (0..plane)
                .flat_map(|i| (0..3).map(move |c| (c, i)))
                .map(|(c, i)| byte(img.data[c * plane + i]));
            RgbImage::from_raw(w, h, interleaved.collect())
                .context("image buffer size")?
                .save(path)?
        }
        n => bail!("{n}-channel frames cannot be stored as PNG"),
    }
    Ok(())
}

/// Random parameters, four noise-and-gradient frames and three previous
/// objects, written as a fixture directory.
fn init_fixture(dir: &Path, config: &PfmConfig, seed: u64) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("create {}", dir.display()))?;
    let params = PfmParams::random(config, seed)?;
    write_atomic(&dir.join(PARAMS_FILE), params.to_json()?.as_bytes())?;

    let mut rng = SplitMix64::new(seed);
    let (c, h, w) = (config.image_channels, config.image_height, config.image_width);
    for name in FRAME_FILES {
        let data = (0..c * h * w)
            .map(|k| {
                let x = (k % w) as f64 / w as f64;
                0.5 * x + 0.5 * rng.next_f64()
            })
            .collect();
        write_image(&dir.join(name), &Image::new(c, h, w, data)?)?;
    }

    let objects: Vec<Detection> = (0..3)
        .map(|_| {
            let (bw, bh) = (rng.uniform(4.0, 12.0), rng.uniform(8.0, 20.0));
            Detection {
                frame: 1,
                bbox: BBox::new(rng.uniform(0.0, w as f64 - bw), rng.uniform(0.0, h as f64 - bh), bw, bh),
                score: 1.0,
                class: ObjectClass::ONE,
                modality: Modality::F,
            }
        })
        .collect();
    write_atomic(&dir.join(OBJECTS_FILE), serialize_detections(&objects).as_bytes())
}

fn load_fixture(dir: &Path) -> Result<(PfmParams, PfmInputs)> {
    let path = dir.join(PARAMS_FILE);
    let text = fs::read_to_string(&path).with_context(|| path.display().to_string())?;
    let params = PfmParams::from_json(&text).with_context(|| path.display().to_string())?;
    let [vis_t, vis_prev, ir_t, ir_prev] = FRAME_FILES.map(|f| read_image(&dir.join(f), &params.config));
    let path = dir.join(OBJECTS_FILE);
    let text = fs::read_to_string(&path).with_context(|| path.display().to_string())?;
    let prev_objects = parse_detections(&text)
        .with_context(|| path.display().to_string())?
        .iter()
        .map(|d| ObjectCenter::from_top_left(d.bbox.x, d.bbox.y, d.bbox.w, d.bbox.h))
        .collect();
    let inputs = PfmInputs {
        vis_t: vis_t?,
        vis_prev: vis_prev?,
        ir_t: ir_t?,
        ir_prev: ir_prev?,
        prev_objects,
    };
    Ok((params, inputs))
}

fn verdict(report: &GradReport, tolerance: f64) -> bool {
    report.n_checked > 0 && report.max_rel_err <= tolerance
}

fn report_line(what: &str, r: &GradReport, pass: bool) -> String {
    format!(
        "{what:<20} max_rel_err {:.3e}  max_abs_err {:.3e}  worst {}  checked {}  skipped {}  {}",
        r.max_rel_err,
        r.max_abs_err,
        r.worst_param,
        r.n_checked,
        r.n_skipped,
        if pass { "PASS" } else { "FAIL" }
    )
}

pub fn demo(args: &PfmDemoArgs) -> Result<bool> {
    if args.init {
        init_fixture(&args.fixture, &PfmConfig::toy().with_variant(args.variant), args.seed)?;
    }
    let (params, inputs) = load_fixture(&args.fixture)?;
    let (out, stages) = pfm_trace(&inputs, &params)?;
    if let Some(path) = &args.out {
        write_atomic(path, serde_json::to_string(&stages)?.as_bytes())?;
    }

    let check = if args.skip_check {
        None
    } else {
        let CheckArgs { step, tolerance } = args.check;
        let frames = FrameImages::new(
            inputs.vis_t,
            inputs.vis_prev,
            inputs.ir_t,
            inputs.ir_prev,
            &inputs.prev_objects,
            params.config.splat,
        );
        let variant = params.config.variant;
        let mut problem = PfmProblem { params, inputs: frames };
        let report = grad_check(&mut problem, step)?;
        let pass = verdict(&report, tolerance);
        Some((variant, report, pass))
    };

    match args.format {
        Format::Machine => {
            let shapes: serde_json::Map<_, _> = stages
                .iter()
                .map(|(k, m)| (k.clone(), json!([m.rows(), m.cols()])))
                .collect();
            let check = check
                .as_ref()
                .map(|(v, r, pass)| json!({"variant": v.name(), "report": r, "pass": pass}));
            println!(
                "{}",
                json!({"output_shape": [out.rows(), out.cols()], "stages": shapes, "gradcheck": check})
            );
        }
        Format::Table => {
            println!("output {}x{}", out.rows(), out.cols());
            for (key, m) in &stages {
                let rms = (m.sum_squares() / (m.rows() * m.cols()).max(1) as f64).sqrt();
                println!("  {key:<20} {:>4}x{:<4} rms {rms:.6}", m.rows(), m.cols());
            }
            if let Some((variant, r, pass)) = &check {
                println!("{}", report_line(&format!("pfm {variant}"), r, *pass));
            }
        }
    }
    Ok(check.map_or(true, |(_, _, pass)| pass))
}

pub fn gradcheck(args: &GradcheckArgs) -> Result<bool> {
    let CheckArgs { step, tolerance } = args.check;
    let seed = args.seed;
    let wants = |t: Target| args.target == t || args.target == Target::All;

    let mut results: Vec<(String, GradReport)> = Vec::new();
    if wants(Target::Softmax) {
        results.push((
            "softmax".into(),
            grad_check(&mut SoftmaxProblem::random(seed, 4, 7), step)?,
        ));
    }
    if wants(Target::LayerNorm) {
        results.push((
            "layer-norm".into(),
            grad_check(&mut LayerNormProblem::random(seed, 6, 16), step)?,
        ));
    }
    if wants(Target::Attention) {
        let mut p = AttentionProblem::random(seed, 8, 8, 16, 4);
        results.push(("attention".into(), grad_check(&mut p, step)?));
    }
    if wants(Target::Ffn) {
        let mut p = FfnProblem::random(seed, 8, 16, 32, 16);
        results.push(("ffn".into(), grad_check(&mut p, step)?));
    }
    if wants(Target::Pfm) {
        for variant in args.variant.variants() {
            let mut p = PfmProblem::random(&PfmConfig::toy().with_variant(variant), seed)?;
            results.push((format!("pfm {variant}"), grad_check(&mut p, step)?));
        }
    }

    let all_pass = results.iter().all(|(_, r)| verdict(r, tolerance));
    match args.format {
        Format::Machine => {
            let doc: Vec<_> = results
                .iter()
                .map(|(name, r)| json!({"target": name, "report": r, "pass": verdict(r, tolerance)}))
                .collect();
            println!("{}", json!({"step": step, "tolerance": tolerance, "results": doc}));
        }
        Format::Table => {
            for (name, r) in &results {
                println!("{}", report_line(name, r, verdict(r, tolerance)));
            }
            println!("{}", if all_pass { "PASS" } else { "FAIL" });
        }
    }
    Ok(all_pass)
}
