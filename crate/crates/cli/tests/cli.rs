use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use handvein::capsync::ClapPattern;
use handvein::domain::{Camera, ChannelLabel, Wavelength};
use handvein::imgcore::{save_image, BitDepth, ImageGray};
use handvein::photostereo::LightSet;
use handvein::synthgen::{render_ps, render_stereo, PsRenderParams, PsScene, ScenePlane, StereoRenderParams, StereoScene, Texture};

fn handvein(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_handvein")).current_dir(dir).env_remove("HANDVEIN_CONFIG").args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(o: Output) -> Output {
    assert!(o.status.success(), "exit {:?}\nstdout: {}\nstderr: {}", o.status, stdout(&o), stderr(&o));
    o
}

/// The single `error: <kind>: <message>` line.
fn error_line(o: &Output) -> (String, String) {
    let err = stderr(o);
    let line = err.lines().next().unwrap_or_default();
    let rest = line.strip_prefix("error: ").unwrap_or_else(|| panic!("no error line in {err:?}"));
    let (kind, msg) = rest.split_once(": ").unwrap_or_else(|| panic!("no kind in {line:?}"));
    assert!(kind.chars().all(|c| c.is_ascii_lowercase() || c == '_'), "kind {kind:?}");
    (kind.to_string(), msg.to_string())
}

fn value_mm(text: &str, label: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with(label)).unwrap_or_else(|| panic!("{label} missing in {text}"));
    line.split_whitespace().rev().nth(1).unwrap().parse().unwrap()
}

#[test]
fn dof_reports_hyperfocal_and_depth() {
    let dir = tempfile::tempdir().unwrap();
    let o = ok(handvein(dir.path(), &["dof", "--f", "4", "--N", "2.5", "--c", "0.004", "--s", "120"]));
    let text = stdout(&o);
    // H = f²/(N·c) + f
    let h = 4.0 * 4.0 / (2.5 * 0.004) + 4.0;
    assert!((value_mm(&text, "hyperfocal") - h).abs() < 0.1, "{text}");
    assert!((value_mm(&text, "hyperfocal") - 1604.0).abs() < 1.0);
    assert!((value_mm(&text, "depth of field") - 17.0).abs() < 1.0, "{text}");
    assert!((value_mm(&text, "near limit") - 112.0).abs() < 0.5);
    assert!((value_mm(&text, "far limit") - 129.0).abs() < 0.5);
}

#[test]
fn usage_and_runtime_errors_exit_nonzero_with_one_error_line() {
    let dir = tempfile::tempdir().unwrap();
    let usage = handvein(dir.path(), &["dof", "--f", "4"]);
    assert_eq!(usage.status.code(), Some(2));
    assert_eq!(error_line(&usage).0, "usage");

    let missing = handvein(dir.path(), &["match", "nope_a", "nope_b"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(error_line(&missing).0, "io");
    assert!(missing.stdout.is_empty());

    let invalid = handvein(dir.path(), &["dof", "--f", "4", "--N", "2.5", "--c", "0.004", "--s", "2"]);
    assert_eq!(invalid.status.code(), Some(1));
    assert_eq!(error_line(&invalid).0, "invalid_param");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("run.toml"), "[fvr.mc]\nsigma = 3.0\nsigmaa = 3.0\n").unwrap();
    let o = handvein(dir.path(), &["--config", "run.toml", "dof", "--f", "4", "--N", "2.5", "--c", "0.004", "--s", "120"]);
    assert_eq!(o.status.code(), Some(1));
    let (kind, msg) = error_line(&o);
    assert_eq!(kind, "config");
    assert!(msg.contains("sigmaa"), "{msg}");

    let o = handvein(dir.path(), &["--set", "bogus.key=1", "dof", "--f", "4", "--N", "2.5", "--c", "0.004", "--s", "120"]);
    assert_eq!(error_line(&o).0, "config");

    let o = Command::new(env!("CARGO_BIN_EXE_handvein"))
        .current_dir(dir.path())
        .env("HANDVEIN_CONFIG", "run.toml")
        .args(["dof", "--f", "4", "--N", "2.5", "--c", "0.004", "--s", "120"])
        .output()
        .unwrap();
    assert_eq!(error_line(&o).0, "config", "the environment names the default config");
}

fn small_run(dir: &Path) -> Vec<String> {
    vec![
        "--set".into(),
        "synth.n_subjects=6".into(),
        "--set".into(),
        "synth.samples_per_hand=2".into(),
        "--set".into(),
        "synth.frames_per_wavelength=1".into(),
        "--set".into(),
        "eval.dev_subjects=3".into(),
        "--set".into(),
        "eval.zei_per_probe=2".into(),
        "--set".into(),
        "eval.protocols=[\"P1\", \"RH_right_950\"]".into(),
        "--dataset".into(),
        dir.join("data").display().to_string(),
    ]
}

fn run_with(dir: &Path, common: &[String], out: &str, args: &[&str]) -> Output {
    let mut all: Vec<&str> = common.iter().map(String::as_str).collect();
    all.extend(["--out", out]);
    all.extend(args);
    ok(handvein(dir, &all))
}

fn files_under(root: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.push(p);
            }
        }
    }
    out.sort();
    out
}

#[test]
fn evaluate_reruns_are_byte_identical_and_self_match_scores_one() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let common = small_run(dir);
    run_with(dir, &common, "a", &["synth"]);
    run_with(dir, &common, "a", &["evaluate"]);
    run_with(dir, &common, "b", &["template"]);
    run_with(dir, &common, "b", &["evaluate"]);
    for name in ["reports/evaluate.csv", "reports/evaluate.txt", "scores/scores.csv", "scores/scores.json"] {
        let read = |run: &str| fs::read_to_string(dir.join(run).join(name)).unwrap();
        assert_eq!(read("a"), read("b"), "{name}");
    }
    let first = fs::read(dir.join("a/reports/evaluate.csv")).unwrap();
    run_with(dir, &common, "a", &["evaluate"]);
    assert_eq!(fs::read(dir.join("a/reports/evaluate.csv")).unwrap(), first);

    let csv = String::from_utf8(first).unwrap();
    assert!(csv.contains("# synth.n_subjects=6"), "config echoed in the report header");
    assert_eq!(csv.lines().filter(|l| l.starts_with("P1,") || l.starts_with("P8,")).count(), 8);

    run_with(dir, &common, "a", &["fuse"]);
    let fusion = fs::read_to_string(dir.join("a/reports/fusion.csv")).unwrap();
    assert_eq!(fusion.lines().filter(|l| l.contains(",fusion,")).count(), 2);

    let stem = dir.join("b/templates/s0001_LH_left_850_n1_f0_middle");
    let o = run_with(dir, &common, "b", &["match", stem.to_str().unwrap(), &format!("{}.png", stem.display())]);
    assert!(stdout(&o).starts_with("score 1.000000\nshift 0 0\n"), "{}", stdout(&o));
}

#[test]
fn fuse_refuses_scores_from_another_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let common = small_run(dir);
    run_with(dir, &common, "o", &["synth"]);
    run_with(dir, &common, "o", &["evaluate"]);
    let mut other = common.clone();
    other.extend(["--set".into(), "eval.target_fmr=0.01".into()]);
    let mut args: Vec<&str> = other.iter().map(String::as_str).collect();
    args.extend(["--out", "o", "fuse"]);
    let o = handvein(dir, &args);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(error_line(&o).0, "config");
}

fn write_inputs(dir: &Path) {
    let scene = StereoScene {
        planes: vec![ScenePlane { z0: 900.0, a: 0.1, b: 0.0, x_range: None, y_range: None }],
        cell_mm: 1.5,
        texture_seed: 3,
        texture: Texture::Dots,
    };
    let p = StereoRenderParams { width: 96, height: 64, ..Default::default() };
    let r = render_stereo(&scene, &p, 1);
    save_image(&r.left, &dir.join("left.png"), None).unwrap();
    save_image(&r.right, &dir.join("right.png"), None).unwrap();
    let calib = serde_json::json!({
        "cameras": {
            "left": { "K": [600.0, 0.0, 47.5, 0.0, 600.0, 31.5, 0.0, 0.0, 1.0], "dist": [0.0, 0.0, 0.0, 0.0, 0.0], "image_size": [96, 64] },
            "right": { "K": [600.0, 0.0, 47.5, 0.0, 600.0, 31.5, 0.0, 0.0, 1.0], "dist": [0.0, 0.0, 0.0, 0.0, 0.0], "image_size": [96, 64] }
        },
        "stereo": { "R": [1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0], "t": [-40.0, 0.0, 0.0], "units": "mm" }
    });
    fs::write(dir.join("calib.json"), serde_json::to_vec(&calib).unwrap()).unwrap();

    let lights = LightSet::corner_banks(100.0, 80.0, 120.0).unwrap();
    let (frames, _) = render_ps(&PsScene::Sphere { cx: 23.5, cy: 23.5, radius: 20.0 }, &lights, &PsRenderParams { width: 48, height: 48, ..Default::default() }, 2);
    for (i, f) in frames.iter().enumerate() {
        save_image(f, &dir.join(format!("ps{i}.png")), None).unwrap();
    }

    let raw = dir.join("raw");
    fs::create_dir_all(&raw).unwrap();
    let clap = ClapPattern::default();
    let frame = |v: u16| ImageGray::filled(8, 8, BitDepth::Ten, v);
    let mut seq = vec![frame(0); 4];
    seq.extend(clap.bits().iter().map(|&b| frame(if b { 1000 } else { 0 })));
    seq.extend((0..6).map(|i| frame(100 + i)));
    seq.extend(clap.bits().iter().map(|&b| frame(if b { 1000 } else { 0 })));
    seq.push(frame(0));
    for (i, f) in seq[2..].iter().enumerate() {
        save_image(f, &raw.join(format!("{i:03}.png")), None).unwrap();
    }
    let labels: Vec<ChannelLabel> = (0..6).map(|i| ChannelLabel { camera: Camera::Left, wavelength: Wavelength::Nir850, bank: i as u8 % 4 }).collect();
    fs::write(dir.join("schedule.json"), serde_json::to_vec(&serde_json::json!({ "prefix_blank": 4, "frames": labels })).unwrap()).unwrap();
}

fn hash_of(o: &Output) -> String {
    stdout(o).lines().find_map(|l| l.strip_prefix("config_hash ")).expect("hash printed").to_string()
}

/// A PNG's hash lives in `<file>.json` or in the `<stem>.json` header
/// shared by the files of one map.
fn sidecars(f: &Path) -> Vec<PathBuf> {
    let name = f.file_name().unwrap().to_string_lossy().into_owned();
    let stem = name.split('.').next().unwrap();
    vec![PathBuf::from(format!("{}.json", f.display())), f.with_file_name(format!("{stem}.json"))]
}

#[test]
fn every_artifact_carries_the_config_hash() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    write_inputs(dir);
    let common = small_run(dir);
    let mut hashes = vec![hash_of(&run_with(dir, &common, "out", &["synth"]))];
    hashes.push(hash_of(&run_with(dir, &common, "out", &["evaluate"])));
    hashes.push(hash_of(&run_with(dir, &common, "out", &["fuse"])));
    let o = run_with(dir, &common, "out", &["sync", "--input", "raw", "--schedule", "schedule.json"]);
    assert!(stdout(&o).starts_with("payload frames 12..18 of 29"), "{}", stdout(&o));
    hashes.push(hash_of(&o));
    let mut stereo = common.clone();
    stereo.extend(["--calibration".into(), "calib.json".into(), "--set".into(), "stereo.d_max=47".into()]);
    hashes.push(hash_of(&run_with(dir, &stereo, "out", &["disparity", "--left", "left.png", "--right", "right.png"])));
    let mut ps = common.clone();
    ps.extend(["--set".into(), "ps.integrate=true".into()]);
    hashes.push(hash_of(&run_with(dir, &ps, "out", &["ps", "--frames", "ps0.png", "ps1.png", "ps2.png", "ps3.png"])));
    assert!(hashes.iter().all(|h| h.len() == 64));
    assert_eq!(hashes[0], hashes[1], "flags that only move outputs leave the hash alone");

    let tagged = |p: &Path| fs::read(p).map(|b| hashes.iter().any(|h| String::from_utf8_lossy(&b).contains(h.as_str()))).unwrap_or(false);
    let files: Vec<PathBuf> = files_under(&dir.join("out")).into_iter().chain(files_under(&dir.join("data"))).collect();
    assert!(files.len() > 100);
    for f in &files {
        let png = f.extension().is_some_and(|e| e == "png");
        assert!(tagged(f) || (png && sidecars(f).iter().any(|s| tagged(s))), "{} carries no config hash", f.display());
    }
    for name in ["maps/disparity.png", "maps/rectified_left.valid.png", "maps/normals.normals.png", "maps/depth.preview.png", "maps/sync/0005.png", "reports/fusion_models.json"] {
        assert!(dir.join("out").join(name).exists(), "{name}");
    }
}
