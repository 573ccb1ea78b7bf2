//! End-to-end runs of the `vtmot` binary.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;

use tempfile::TempDir;
use vtmot::metrics::{parse_machine, render_machine};
use vtmot::mot_data::layout::{load_dataset, GT_DIR, GT_FILE};
use vtmot::mot_data::DatasetStats;
use vtmot_pfm::fusion::PfmParams;
use vtmot_pfm::Matrix;

struct Run {
    code: i32,
    stdout: String,
    stderr: String,
}

fn vtmot_env(args: &[&str], env: &[(&str, &str)]) -> Run {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vtmot"));
    cmd.args(args).env_remove("VTMOT_JOBS");
    for (k, v) in env {
        cmd.env(k, v);
    }
    let out = cmd.output().expect("spawn vtmot");
    Run {
        code: out.status.code().expect("exit code"),
        stdout: String::from_utf8(out.stdout).unwrap(),
        stderr: String::from_utf8(out.stderr).unwrap(),
    }
}

fn vtmot(args: &[&str]) -> Run {
    vtmot_env(args, &[])
}

fn ok(args: &[&str]) -> String {
    let r = vtmot(args);
    assert_eq!(r.code, 0, "{args:?}\nstdout:\n{}\nstderr:\n{}", r.stdout, r.stderr);
    r.stdout
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// A clean generated dataset plus perfect results: (tempdir, dataset, results).
fn generated(extra: &[&str]) -> (TempDir, String, String) {
    let dir = TempDir::new().unwrap();
    let ds = dir.path().join("ds");
    let res = dir.path().join("res");
    let mut args = vec!["gen", "--out", p(&ds), "--oracle-results", p(&res)];
    args.extend_from_slice(extra);
    ok(&args);
    (dir, p(&ds).to_string(), p(&res).to_string())
}

#[test]
fn help_lists_every_command_and_flag() {
    let top = ok(&["--help"]);
    for cmd in ["validate", "stats", "evaluate", "track", "pfm-demo", "gradcheck", "gen"] {
        assert!(top.contains(cmd), "{cmd} missing from:\n{top}");
    }
    let flags: [(&str, &[&str]); 7] = [
        ("validate", &["--dataset", "--jobs", "--format"]),
        (
            "stats",
            &[
                "--dataset",
                "--frames",
                "--boxes",
                "--videos",
                "--frame-rate",
                "--area",
                "--format",
            ],
        ),
        (
            "evaluate",
            &[
                "--gt",
                "--res",
                "--protocol",
                "--threshold",
                "--jobs",
                "--format",
                "VTMOT_JOBS",
            ],
        ),
        (
            "track",
            &[
                "--dataset",
                "--out",
                "--iou-threshold",
                "--max-age",
                "--score-birth",
                "--nms-threshold",
            ],
        ),
        (
            "pfm-demo",
            &[
                "--fixture",
                "--init",
                "--seed",
                "--variant",
                "--out",
                "--skip-check",
                "--step",
                "--tolerance",
            ],
        ),
        (
            "gradcheck",
            &["--target", "--variant", "--seed", "--step", "--tolerance", "--format"],
        ),
        (
            "gen",
            &[
                "--out",
                "--sequences",
                "--platform-mix",
                "--tracks",
                "--frames",
                "--motion",
                "--drop-rate",
                "--seed",
            ],
        ),
    ];
    for (cmd, expected) in flags {
        let help = ok(&[cmd, "--help"]);
        for flag in expected {
            assert!(help.contains(flag), "{cmd} --help lacks {flag}:\n{help}");
        }
    }
}

#[test]
fn usage_errors_exit_two_on_stderr() {
    for args in [
        vec!["evaluate"],
        vec!["evaluate", "--gt", "a"],
        vec!["evaluate", "--gt", "a", "--res", "b", "--protocol", "3"],
        vec!["stats", "--dataset", "d", "--bogus"],
        vec!["stats"],
        vec!["stats", "--frames", "10"],
        vec!["validate", "--dataset", "d", "--jobs", "0"],
        vec!["gradcheck", "--variant", "nope"],
        vec!["frobnicate"],
        vec![],
    ] {
        let r = vtmot(&args);
        assert_eq!(r.code, 2, "{args:?}: {}", r.stderr);
        assert!(!r.stderr.is_empty(), "{args:?}");
        assert!(r.stdout.is_empty(), "{args:?}");
    }
}

#[test]
fn jobs_env_is_validated_like_the_flag() {
    let r = vtmot_env(&["validate", "--dataset", "nowhere"], &[("VTMOT_JOBS", "0")]);
    assert_eq!(r.code, 2);
}

#[test]
fn runtime_failures_exit_one_with_a_diagnostic() {
    let dir = TempDir::new().unwrap();
    let missing = dir.path().join("missing");
    for args in [
        vec!["validate", "--dataset", p(&missing)],
        vec!["stats", "--dataset", p(&missing)],
        vec!["evaluate", "--gt", p(&missing), "--res", p(&missing)],
    ] {
        let r = vtmot(&args);
        assert_eq!(r.code, 1, "{args:?}");
        assert!(r.stderr.starts_with("error:"), "{args:?}: {}", r.stderr);
    }
}

#[test]
fn stats_density_is_boxes_over_frames() {
    let (_dir, ds, _) = generated(&[
        "--sequences",
        "2",
        "--tracks",
        "4",
        "--frames",
        "30",
        "--drop-rate",
        "0.2",
    ]);
    let machine = ok(&["stats", "--dataset", &ds, "--format", "machine"]);
    let doc: serde_json::Value = serde_json::from_str(&machine).unwrap();
    let stats: DatasetStats = serde_json::from_value(doc["stats"].clone()).unwrap();
    assert_eq!(stats.n_videos, 2);
    assert_eq!(stats.n_frames, 60);
    assert_eq!(stats.n_boxes, 240);
    assert_eq!(stats.density, Some(240.0 / 60.0));

    let table = ok(&["stats", "--dataset", &ds]);
    let expected = format!("{:.2}", stats.n_boxes as f64 / stats.n_frames as f64);
    let row = table.lines().nth(2).unwrap();
    assert_eq!(row.split_whitespace().nth(4), Some(expected.as_str()), "{table}");
}

#[test]
fn stats_machine_output_round_trips() {
    let (_dir, ds, _) = generated(&["--sequences", "3", "--motion", "crossing", "--tracks", "4"]);
    let machine = ok(&["stats", "--dataset", &ds, "--format", "machine", "--area", "500"]);
    let doc: serde_json::Value = serde_json::from_str(&machine).unwrap();
    let stats: DatasetStats = serde_json::from_value(doc["stats"].clone()).unwrap();
    let again = serde_json::to_string_pretty(&serde_json::json!({"stats": stats, "areas": doc["areas"]})).unwrap();
    assert_eq!(again, machine.trim_end());
    assert_eq!(doc["areas"][0]["bin"], 3);
}

#[test]
fn stats_from_counts() {
    let out = ok(&[
        "stats",
        "--frames",
        "401068",
        "--boxes",
        "3994777",
        "--videos",
        "582",
        "--frame-rate",
        "25",
    ]);
    let row: Vec<&str> = out.lines().nth(2).unwrap().split_whitespace().collect();
    assert_eq!(row, ["582", "401068", "-", "3994777", "9.96", "27.56"]);
}

#[test]
fn evaluate_clean_scenario_is_perfect() {
    let (_dir, ds, res) = generated(&["--sequences", "2", "--tracks", "3", "--frames", "40"]);
    let table = ok(&["evaluate", "--gt", &ds, "--res", &res, "--protocol", "1"]);
    let header: Vec<&str> = table.lines().nth(1).unwrap().split_whitespace().collect();
    assert_eq!(
        header,
        ["Sequence", "HOTA", "DetA", "AssA", "MOTA", "MOTP", "IDF1", "FP", "FN", "IDSW"]
    );
    let combined = table.lines().find(|l| l.starts_with("COMBINED")).unwrap();
    let cols: Vec<&str> = combined.split_whitespace().collect();
    assert_eq!(cols[1], "100.000", "HOTA");
    assert_eq!(cols[4], "100.000", "MOTA");

    let machine = ok(&["evaluate", "--gt", &ds, "--res", &res, "--format", "machine"]);
    let report = parse_machine(&machine).unwrap();
    assert_eq!(render_machine(&report), machine.trim_end());
    assert_eq!(report.groups[0].pooled.clear.mota, 1.0);
    assert_eq!(report.groups[0].pooled.hota.hota, 1.0);
}

#[test]
fn evaluate_is_bit_identical_across_runs_and_job_counts() {
    let (_dir, ds, res) = generated(&[
        "--sequences",
        "5",
        "--tracks",
        "4",
        "--frames",
        "40",
        "--drop-rate",
        "0.2",
        "--fp-rate",
        "0.5",
        "--motion",
        "crossing",
        "--platform-mix",
        "uav=2,handheld=2,surveillance=1",
    ]);
    for format in ["table", "machine"] {
        let base = ok(&[
            "evaluate",
            "--gt",
            &ds,
            "--res",
            &res,
            "--protocol",
            "2",
            "--format",
            format,
        ]);
        assert_eq!(
            base,
            ok(&[
                "evaluate",
                "--gt",
                &ds,
                "--res",
                &res,
                "--protocol",
                "2",
                "--format",
                format
            ])
        );
        let jobs = ok(&[
            "evaluate",
            "--gt",
            &ds,
            "--res",
            &res,
            "--protocol",
            "2",
            "--format",
            format,
            "--jobs",
            "3",
        ]);
        assert_eq!(base, jobs);
        let env = vtmot_env(
            &[
                "evaluate",
                "--gt",
                &ds,
                "--res",
                &res,
                "--protocol",
                "2",
                "--format",
                format,
            ],
            &[("VTMOT_JOBS", "4")],
        );
        assert_eq!((env.code, env.stdout), (0, base));
    }
}

#[test]
fn evaluate_output_is_sorted_by_sequence() {
    let (_dir, ds, res) = generated(&["--sequences", "4", "--frames", "10"]);
    let table = ok(&["evaluate", "--gt", &ds, "--res", &res, "--jobs", "4"]);
    let names: Vec<&str> = table
        .lines()
        .filter(|l| l.starts_with("seq"))
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(names, ["seq0001", "seq0002", "seq0003", "seq0004"]);
}

#[test]
fn evaluate_names_missing_results() {
    let (_dir, ds, res) = generated(&["--sequences", "3", "--frames", "10"]);
    fs::remove_file(Path::new(&res).join("seq0002.txt")).unwrap();
    let r = vtmot(&["evaluate", "--gt", &ds, "--res", &res]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("seq0002"), "{}", r.stderr);
    assert!(r.stdout.is_empty());
}

#[test]
fn protocol_two_groups_by_platform() {
    let (_dir, ds, res) = generated(&["--platform-mix", "handheld=3,surveillance=2,uav=1", "--frames", "5"]);
    let machine = ok(&[
        "evaluate",
        "--gt",
        &ds,
        "--res",
        &res,
        "--protocol",
        "2",
        "--format",
        "machine",
    ]);
    let report = parse_machine(&machine).unwrap();
    let sizes: BTreeMap<&str, usize> = report
        .groups
        .iter()
        .map(|g| (g.group.as_str(), g.per_sequence.len()))
        .collect();
    assert_eq!(
        sizes,
        BTreeMap::from([("handheld", 3), ("surveillance", 2), ("UAV", 1)])
    );
    assert!(report.group_mean.is_some());
}

#[test]
fn gen_rejects_inconsistent_counts() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("ds");
    let r = vtmot(&[
        "gen",
        "--out",
        p(&out),
        "--sequences",
        "4",
        "--platform-mix",
        "uav=2,handheld=1",
    ]);
    assert_eq!(r.code, 1);
    let r = vtmot(&["gen", "--out", p(&out), "--platform-mix", "boat=2"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("boat"));
}

#[test]
fn gen_is_deterministic() {
    let (_a, ds_a, _) = generated(&["--sequences", "2", "--drop-rate", "0.3", "--jitter", "1", "--seed", "9"]);
    let (_b, ds_b, _) = generated(&["--sequences", "2", "--drop-rate", "0.3", "--jitter", "1", "--seed", "9"]);
    for name in ["seq0001", "seq0002"] {
        for file in ["seqinfo.ini", "gt/gt.txt", "gt/gt1.txt", "det/det.txt"] {
            let a = fs::read(Path::new(&ds_a).join(name).join(file)).unwrap();
            let b = fs::read(Path::new(&ds_b).join(name).join(file)).unwrap();
            assert_eq!(a, b, "{name}/{file}");
        }
    }
}

#[test]
fn validate_reports_defects_and_exit_status() {
    let (_dir, ds, _) = generated(&["--sequences", "2", "--frames", "10"]);
    let out = ok(&["validate", "--dataset", &ds]);
    assert!(out.contains("2/2 sequences valid"), "{out}");

    let gt = Path::new(&ds).join("seq0002").join(GT_DIR).join(GT_FILE);
    let text = fs::read_to_string(&gt).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    let mut fields: Vec<String> = lines[0].split(',').map(String::from).collect();
    fields[7] = "7".into();
    lines[0] = fields.join(",");
    fs::write(&gt, lines.join("\n") + "\n").unwrap();

    let r = vtmot(&["validate", "--dataset", &ds]);
    assert_eq!(r.code, 1);
    assert!(
        r.stdout.contains("seq0002") && r.stdout.contains("InvalidClass"),
        "{}",
        r.stdout
    );
    assert!(r.stdout.contains("1/2 sequences valid"));

    let single = vtmot(&[
        "validate",
        "--dataset",
        Path::new(&ds).join("seq0001").to_str().unwrap(),
    ]);
    assert_eq!(single.code, 0);

    let machine = vtmot(&["validate", "--dataset", &ds, "--format", "machine"]);
    assert_eq!(machine.code, 1);
    let doc: BTreeMap<String, vtmot::mot_data::ValidationReport> = serde_json::from_str(&machine.stdout).unwrap();
    assert!(doc["seq0001"].is_valid());
    assert!(!doc["seq0002"].is_valid());
}

#[test]
fn track_then_evaluate_clean_scenario() {
    let (dir, ds, _) = generated(&["--sequences", "2", "--tracks", "3", "--frames", "50"]);
    let out = dir.path().join("tracked");
    let listing = ok(&["track", "--dataset", &ds, "--out", p(&out), "--jobs", "2"]);
    assert!(listing.contains("seq0001") && listing.contains("seq0002"));
    let mut files: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    files.sort();
    assert_eq!(files, ["seq0001.txt", "seq0002.txt"], "no temporary files left behind");

    let machine = ok(&["evaluate", "--gt", &ds, "--res", p(&out), "--format", "machine"]);
    let report = parse_machine(&machine).unwrap();
    let pooled = &report.groups[0].pooled;
    assert_eq!(pooled.clear.mota, 1.0);
    assert_eq!(pooled.clear.idsw, 0);
    assert_eq!(load_dataset(Path::new(&ds)).unwrap().len(), 2);
}

#[test]
fn track_failure_leaves_no_partial_results() {
    let (dir, ds, _) = generated(&["--sequences", "2", "--frames", "10"]);
    fs::write(Path::new(&ds).join("seq0002").join("det").join("det.txt"), "1,2,3\n").unwrap();
    let out = dir.path().join("tracked");
    let r = vtmot(&["track", "--dataset", &ds, "--out", p(&out)]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("seq0002"), "{}", r.stderr);
    let files: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    assert_eq!(files, ["seq0001.txt"]);
}

#[test]
fn gradcheck_on_a_kernel_passes() {
    let out = ok(&["gradcheck", "--target", "attention"]);
    assert!(out.contains("max_rel_err"), "{out}");
    assert_eq!(out.lines().last(), Some("PASS"));
}

/// The verdict and exit status follow the printed error and the tolerance.
#[test]
fn gradcheck_default_toy_config() {
    let r = vtmot(&["gradcheck", "--format", "machine"]);
    let doc: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    assert_eq!(doc["step"], 1e-5);
    assert_eq!(doc["tolerance"], 1e-4);
    let result = &doc["results"][0];
    assert_eq!(result["target"], "pfm full");
    let err = result["report"]["max_rel_err"].as_f64().unwrap();
    let pass = err <= 1e-4;
    println!("default gradcheck max_rel_err {err:.3e}");
    assert_eq!(result["pass"], pass);
    assert_eq!(r.code, if pass { 0 } else { 1 });
}

#[test]
fn pfm_demo_writes_every_stage() {
    let dir = TempDir::new().unwrap();
    let fixture = dir.path().join("fixture");
    let doc_path = dir.path().join("stages.json");
    let out = ok(&[
        "pfm-demo",
        "--fixture",
        p(&fixture),
        "--init",
        "--seed",
        "3",
        "--variant",
        "mff-uni",
        "--out",
        p(&doc_path),
        "--skip-check",
    ]);
    assert!(out.starts_with("output 4x16"), "{out}");
    for f in [
        "params.json",
        "vis_t.png",
        "vis_prev.png",
        "ir_t.png",
        "ir_prev.png",
        "prev_objects.txt",
    ] {
        assert!(fixture.join(f).is_file(), "{f}");
    }
    let params = PfmParams::from_json(&fs::read_to_string(fixture.join("params.json")).unwrap()).unwrap();
    assert_eq!(params.config.variant.name(), "mff-uni");

    let stages: BTreeMap<String, Matrix> = serde_json::from_str(&fs::read_to_string(&doc_path).unwrap()).unwrap();
    for key in ["output", "heatmap", "tokens.vis_t", "tokens.ir_prev", "tokens.heatmap"] {
        assert!(
            stages.contains_key(key),
            "{key} missing from {:?}",
            stages.keys().collect::<Vec<_>>()
        );
    }
    assert_eq!(stages["output"].shape(), (4, 16));
    assert_eq!(stages["heatmap"].shape(), (32, 32));
    assert!(stages["heatmap"].as_slice().iter().any(|v| *v > 0.5));

    // rerunning the stored fixture reproduces the document exactly
    let again = dir.path().join("again.json");
    ok(&["pfm-demo", "--fixture", p(&fixture), "--out", p(&again), "--skip-check"]);
    assert_eq!(fs::read(&doc_path).unwrap(), fs::read(&again).unwrap());
}

#[test]
fn pfm_demo_prints_a_gradient_report() {
    let dir = TempDir::new().unwrap();
    let fixture = dir.path().join("fixture");
    let r = vtmot(&[
        "pfm-demo",
        "--fixture",
        p(&fixture),
        "--init",
        "--variant",
        "tff-only",
        "--format",
        "machine",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&r.stdout).unwrap();
    let check = &doc["gradcheck"];
    assert_eq!(check["variant"], "tff-only");
    let err = check["report"]["max_rel_err"].as_f64().unwrap();
    assert!(check["report"]["n_checked"].as_u64().unwrap() > 20_000);
    assert_eq!(check["pass"], err <= 1e-4);
    assert_eq!(r.code, if err <= 1e-4 { 0 } else { 1 });
}

#[test]
fn pfm_demo_rejects_bad_fixtures() {
    let dir = TempDir::new().unwrap();
    let fixture = dir.path().join("fixture");
    ok(&["pfm-demo", "--fixture", p(&fixture), "--init", "--skip-check"]);
    image::GrayImage::new(16, 16).save(fixture.join("ir_t.png")).unwrap();
    let r = vtmot(&["pfm-demo", "--fixture", p(&fixture), "--skip-check"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("ir_t.png"), "{}", r.stderr);

    fs::remove_file(fixture.join("params.json")).unwrap();
    let r = vtmot(&["pfm-demo", "--fixture", p(&fixture), "--skip-check"]);
    assert_eq!(r.code, 1);
    assert!(r.stderr.contains("params.json"));
}
