//! Subcommand bodies. Every file written goes through `write_atomic` and
//! carries the run's config hash, in a sidecar when the format has no room.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use handvein::capsync::{detect_claps, trim_and_label, CaptureSchedule, FrameSequence};
use handvein::domain::{Camera, Finger, Wavelength};
use handvein::evalharness::{
    evaluate_fusion, evaluate_protocols, extract_templates, fuse_fingers, scores_csv, Manifest, ManifestEntry, ProtocolReport, Report, ScoreRecord,
    Split, TemplateStore,
};
use handvein::fvr::{enhancer_by_name, finger_stem, load_template, miura_match, save_template, template_stem};
use handvein::geometry::{dof_calc, fov_calc, rectify_pair, CalibrationFile, OpticsSpec};
use handvein::imgcore::io::{encode_mask_png, save_image_tagged, write_atomic};
use handvein::imgcore::{load_image, BinaryMask, BitDepth, ImageGray};
use handvein::linalg::Vec3;
use handvein::photostereo::io::save_normals;
use handvein::photostereo::{flatfield_calibrate, integrate_depth, ps_normals};
use handvein::stereo::compute_disparity;
use handvein::stereo::io::save_disparity;
use handvein::synthgen::SyntheticDataset;
use handvein::{CameraIntrinsics, Error, LightSet, Result};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::RunConfig;
use crate::{DisparityArgs, DofArgs, FovArgs, MatchArgs, PairArgs, PsArgs, SyncArgs, TemplateArgs};

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    write_atomic(path, text.as_bytes())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// 8-bit min–max stretch of the valid samples; invalid pixels are 0.
fn preview(width: usize, height: usize, values: &[f64], valid: &BinaryMask) -> ImageGray {
    let live = || values.iter().zip(valid.bits()).filter(|(v, &ok)| ok && v.is_finite()).map(|(v, _)| *v);
    let lo = live().fold(f64::INFINITY, f64::min);
    let hi = live().fold(f64::NEG_INFINITY, f64::max);
    let span = if hi > lo { hi - lo } else { 1.0 };
    ImageGray::from_fn(width, height, BitDepth::Eight, |x, y| {
        let i = y * width + x;
        if valid.bits()[i] && values[i].is_finite() {
            (1.0 + 254.0 * (values[i] - lo) / span).round() as u16
        } else {
            0
        }
    })
}

fn save_mask(mask: &BinaryMask, path: &Path, hash: &str) -> Result<()> {
    write_atomic(path, &encode_mask_png(mask)?)?;
    let mut side = path.as_os_str().to_owned();
    side.push(".json");
    write_json(Path::new(&side), &json!({ "width": mask.width(), "height": mask.height(), "config_hash": hash }))
}

fn calibration(cfg: &RunConfig) -> Result<Option<CalibrationFile>> {
    cfg.paths.calibration.as_deref().map(CalibrationFile::load).transpose()
}

pub fn synth(cfg: &RunConfig) -> Result<()> {
    let hash = cfg.hash();
    let root = cfg.dataset_dir();
    let ds = SyntheticDataset::new(&cfg.synth)?;
    ds.write_tagged(&root, Some(&hash))?;
    println!("wrote {} images for {} subjects to {}", ds.manifest.entries.len(), cfg.synth.n_subjects, root.display());
    println!("config_hash {hash}");
    Ok(())
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("png" | "pgm")))
        .collect();
    files.sort();
    Ok(files)
}

fn load_schedule(path: &Path) -> Result<CaptureSchedule> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    if path.extension().and_then(|e| e.to_str()) == Some("toml") {
        toml::from_str(&text).map_err(|e| Error::Config(e.to_string().split_whitespace().collect::<Vec<_>>().join(" ")))
    } else {
        Ok(serde_json::from_str(&text)?)
    }
}

pub fn sync(cfg: &RunConfig, args: &SyncArgs) -> Result<()> {
    let hash = cfg.hash();
    let schedule = load_schedule(&args.schedule)?;
    let files = image_files(&args.input)?;
    let frames = files.iter().map(|p| load_image(p)).collect::<Result<Vec<_>>>()?;
    let seq = FrameSequence::unlabelled(frames, schedule.nominal_rate_hz);
    let pos = detect_claps(&seq, &schedule, &cfg.sync)?;
    let trimmed = trim_and_label(&seq, &schedule, &cfg.sync)?;
    let dir = cfg.out_dir("maps").join("sync");
    create_dir(&dir)?;
    let mut listing = Vec::new();
    for (i, (img, label)) in trimmed.frames.iter().zip(&trimmed.labels).enumerate() {
        let name = format!("{i:04}.png");
        save_image_tagged(img, &dir.join(&name), Some(*label), Some(&hash))?;
        listing.push(json!({ "file": name, "source": files[pos.start + i].display().to_string(), "label": label }));
    }
    write_json(&dir.join("sync.json"), &json!({ "config_hash": hash, "start": pos.start, "end": pos.end, "frames": listing }))?;
    println!("payload frames {}..{} of {}; wrote {} frames to {}", pos.start, pos.end, seq.len(), trimmed.len(), dir.display());
    println!("config_hash {hash}");
    Ok(())
}

fn rectified(cfg: &RunConfig, args: &PairArgs, calib: &CalibrationFile, hash: &str) -> Result<(ImageGray, ImageGray)> {
    let (left, right) = (load_image(&args.left)?, load_image(&args.right)?);
    let il: CameraIntrinsics = calib.intrinsics(Camera::Left)?;
    let ir: CameraIntrinsics = calib.intrinsics(Camera::Right)?;
    let pair = rectify_pair(&left, &right, &il, &ir, &calib.stereo()?)?;
    let dir = cfg.out_dir("maps");
    create_dir(&dir)?;
    save_image_tagged(&pair.left, &dir.join("rectified_left.png"), None, Some(hash))?;
    save_image_tagged(&pair.right, &dir.join("rectified_right.png"), None, Some(hash))?;
    save_mask(&pair.left_valid, &dir.join("rectified_left.valid.png"), hash)?;
    save_mask(&pair.right_valid, &dir.join("rectified_right.valid.png"), hash)?;
    write_json(&dir.join("rig.json"), &json!({ "config_hash": hash, "rig": pair.rig }))?;
    Ok((pair.left, pair.right))
}

pub fn rectify(cfg: &RunConfig, args: &PairArgs) -> Result<()> {
    let calib = calibration(cfg)?.ok_or_else(|| Error::Config("rectify needs paths.calibration".into()))?;
    let hash = cfg.hash();
    let (l, _) = rectified(cfg, args, &calib, &hash)?;
    println!("rectified {}x{} pair into {}", l.width(), l.height(), cfg.out_dir("maps").display());
    println!("config_hash {hash}");
    Ok(())
}

pub fn disparity(cfg: &RunConfig, args: &DisparityArgs) -> Result<()> {
    let hash = cfg.hash();
    let (left, right) = match calibration(cfg)? {
        Some(calib) if !args.rectified => rectified(cfg, &args.pair, &calib, &hash)?,
        _ => (load_image(&args.pair.left)?, load_image(&args.pair.right)?),
    };
    let map = compute_disparity(&left, &right, &cfg.stereo)?;
    let dir = cfg.out_dir("maps");
    create_dir(&dir)?;
    save_disparity(&map, &dir.join("disparity"), Some(&hash))?;
    let values: Vec<f64> = map.d.iter().map(|&d| d as f64).collect();
    save_image_tagged(&preview(map.width, map.height, &values, &map.valid), &dir.join("disparity.preview.png"), None, Some(&hash))?;
    let valid = map.valid.count() as f64 / (map.width * map.height).max(1) as f64;
    println!("disparity {}x{}, range {}..={}, {:.1}% valid", map.width, map.height, map.d_min, map.d_max, 100.0 * valid);
    println!("config_hash {hash}");
    Ok(())
}

pub fn ps(cfg: &RunConfig, args: &PsArgs) -> Result<()> {
    let hash = cfg.hash();
    let p = &cfg.ps;
    let lights = match &p.lights {
        Some(dirs) => LightSet::new(dirs.iter().map(|d| Vec3::new(d[0], d[1], d[2])).collect())?,
        None => LightSet::corner_banks(p.bank_width, p.bank_height, p.distance)?,
    };
    let frames = args.frames.iter().map(|f| load_image(f)).collect::<Result<Vec<_>>>()?;
    let ff = if args.refs.is_empty() {
        None
    } else {
        let refs = args.refs.iter().map(|f| load_image(f)).collect::<Result<Vec<_>>>()?;
        Some(flatfield_calibrate(&refs)?)
    };
    let field = ps_normals(&frames, &lights, ff.as_ref())?;
    let dir = cfg.out_dir("maps");
    create_dir(&dir)?;
    save_normals(&field, &dir.join("normals"), Some(&hash))?;
    save_image_tagged(&preview(field.width, field.height, &field.albedo, &field.valid), &dir.join("albedo.preview.png"), None, Some(&hash))?;
    if p.integrate {
        let depth = integrate_depth(&field)?;
        save_image_tagged(&preview(depth.width, depth.height, &depth.data, &field.valid), &dir.join("depth.preview.png"), None, Some(&hash))?;
    }
    let valid = field.valid.count() as f64 / (field.width * field.height).max(1) as f64;
    println!("normals {}x{} from {} lights, {:.1}% valid", field.width, field.height, lights.len(), 100.0 * valid);
    println!("config_hash {hash}");
    Ok(())
}

pub fn dof(args: &DofArgs) -> Result<()> {
    let (sw, sh) = (args.sensor_width.unwrap_or(1.0), args.sensor_height.unwrap_or(1.0));
    let spec = OpticsSpec { focal_length: args.f, f_number: args.n, circle_of_confusion: args.c, focus_distance: args.s, sensor_width: sw, sensor_height: sh };
    let d = dof_calc(&spec)?;
    println!("hyperfocal distance H  {:>9.1} mm", d.hyperfocal);
    println!("near limit Dn          {:>9.1} mm", d.near);
    println!("far limit Df           {:>9.1} mm", d.far);
    println!("depth of field Δ       {:>9.1} mm", d.depth);
    if args.sensor_width.is_some() {
        print_fov(args.f, sw, sh, args.s)?;
    }
    Ok(())
}

fn print_fov(f: f64, sw: f64, sh: f64, d: f64) -> Result<()> {
    let v = fov_calc(f, sw, sh, d)?;
    println!("angle of view h/v/d    {:>6.1} / {:.1} / {:.1} deg", v.angle_h, v.angle_v, v.angle_d);
    println!("coverage at {d} mm h/v/d {:>6.1} / {:.1} / {:.1} mm", v.fov_h, v.fov_v, v.fov_d);
    Ok(())
}

pub fn fov(args: &FovArgs) -> Result<()> {
    print_fov(args.f, args.sensor_width, args.sensor_height, args.d)
}

/// Parses `1-5,8` into a set of subject ids.
fn parse_subjects(spec: &str) -> Result<BTreeSet<u32>> {
    let bad = || Error::InvalidParam(format!("subject list {spec:?}"));
    let mut out = BTreeSet::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                out.extend(a..=b);
            }
            None => {
                out.insert(part.parse().map_err(|_| bad())?);
            }
        }
    }
    if out.is_empty() {
        return Err(bad());
    }
    Ok(out)
}

/// Extracts templates per camera so each uses its own intrinsics, then
/// writes them with a manifest recording exclusions.
fn build_templates(cfg: &RunConfig, manifest: &Manifest, hash: &str) -> Result<(TemplateStore, Manifest)> {
    let root = cfg.dataset_dir();
    let enhancer = enhancer_by_name(&cfg.fvr.enhance.name)?;
    let calib = calibration(cfg)?;
    let load = |e: &ManifestEntry| load_image(&Manifest::image_path(&root, e));
    let mut store = TemplateStore::new();
    let mut out = manifest.clone();
    for camera in [Camera::Left, Camera::Right] {
        let part = Manifest { entries: manifest.entries.iter().filter(|e| e.source.camera == camera).cloned().collect(), ..manifest.clone() };
        let intr: Option<CameraIntrinsics> = calib.as_ref().map(|c| c.intrinsics(camera)).transpose()?;
        let (s, m) = extract_templates(&part, load, intr.as_ref(), enhancer.as_ref(), &cfg.fvr, hash)?;
        for (src, ts) in s.iter() {
            store.insert(src.clone(), ts.to_vec());
        }
        for e in m.entries {
            if let Some(slot) = out.entries.iter_mut().find(|o| o.source == e.source) {
                *slot = e;
            }
        }
    }
    let dir = cfg.out_dir("templates");
    create_dir(&dir)?;
    for (_, ts) in store.iter() {
        for t in ts {
            save_template(t, &template_stem(&dir, t))?;
        }
    }
    out.config_hash = Some(hash.to_string());
    out.save(&dir.join("manifest.json"))?;
    Ok((store, out))
}

fn dataset_manifest(cfg: &RunConfig) -> Result<Manifest> {
    Manifest::load(&cfg.dataset_dir().join("manifest.json"))
}

pub fn template(cfg: &RunConfig, args: &TemplateArgs) -> Result<()> {
    let hash = cfg.hash();
    let mut manifest = dataset_manifest(cfg)?;
    if let Some(spec) = &args.subjects {
        let wanted = parse_subjects(spec)?;
        manifest.entries.retain(|e| wanted.contains(&e.source.subject));
    }
    let (store, out) = build_templates(cfg, &manifest, &hash)?;
    let excluded = out.entries.iter().filter(|e| e.excluded).count();
    let n: usize = store.iter().map(|(_, t)| t.len()).sum();
    println!("{n} templates from {} frames, {excluded} frames excluded; written to {}", store.len(), cfg.out_dir("templates").display());
    println!("config_hash {hash}");
    Ok(())
}

/// Accepts a template stem or either of its files.
fn template_path_stem(p: &Path) -> PathBuf {
    match p.extension().and_then(|e| e.to_str()) {
        Some("png" | "json") => p.with_extension(""),
        _ => p.to_path_buf(),
    }
}

pub fn matching(cfg: &RunConfig, args: &MatchArgs) -> Result<()> {
    let a = load_template(&template_path_stem(&args.a))?;
    let b = load_template(&template_path_stem(&args.b))?;
    let r = miura_match(&a.mc_map, &b.mc_map, &cfg.fvr.matching);
    println!("score {:.6}", r.score);
    println!("shift {} {}", r.shift.0, r.shift.1);
    println!("overlap {}", r.overlap);
    Ok(())
}

/// Templates from an earlier `template` run over the whole dataset under the
/// same config, else freshly extracted.
fn templates_for(cfg: &RunConfig, hash: &str) -> Result<(TemplateStore, Manifest)> {
    let dataset = dataset_manifest(cfg)?;
    let cached = cfg.out_dir("templates").join("manifest.json");
    if cached.exists() {
        let m = Manifest::load(&cached)?;
        let same_frames = m.entries.len() == dataset.entries.len() && m.entries.iter().zip(&dataset.entries).all(|(a, b)| a.source == b.source);
        if m.config_hash.as_deref() == Some(hash) && same_frames {
            let dir = cfg.out_dir("templates");
            let mut store = TemplateStore::new();
            for e in &m.entries {
                let nir = matches!(e.source.wavelength, Wavelength::Nir850 | Wavelength::Nir950);
                if e.excluded || !nir || !matches!(e.source.camera, Camera::Left | Camera::Right) {
                    continue;
                }
                let ts = Finger::EVALUATED.iter().map(|&f| load_template(&finger_stem(&dir, &e.source, f))).collect::<Result<Vec<_>>>()?;
                store.insert(e.source.clone(), ts);
            }
            return Ok((store, m));
        }
    }
    build_templates(cfg, &dataset, hash)
}

#[derive(Serialize, Deserialize)]
struct ScoreFile {
    config_hash: String,
    records: Vec<ScoreRecord>,
}

fn report(cfg: &RunConfig, title: &str, rows: Vec<ProtocolReport>, hash: &str) -> Report {
    let mut header = vec![("config_hash".to_string(), hash.to_string())];
    header.extend(cfg.flattened());
    Report { title: title.to_string(), header, rows }
}

fn write_report(dir: &Path, name: &str, r: &Report, hash: &str) -> Result<()> {
    write_text(&dir.join(format!("{name}.csv")), &r.to_csv())?;
    write_text(&dir.join(format!("{name}.txt")), &format!("{}config_hash {hash}\n", r.to_table()))
}

pub fn evaluate(cfg: &RunConfig) -> Result<()> {
    let hash = cfg.hash();
    let (store, manifest) = templates_for(cfg, &hash)?;
    let out = evaluate_protocols(&manifest, &store, &cfg.eval, &cfg.fvr.matching)?;

    let scores = cfg.out_dir("scores");
    create_dir(&scores)?;
    write_text(&scores.join("scores.csv"), &format!("# config_hash={hash}\n{}", scores_csv(&out.records)))?;
    write_json(&scores.join("scores.json"), &ScoreFile { config_hash: hash.clone(), records: out.records })?;

    let reports = cfg.out_dir("reports");
    create_dir(&reports)?;
    let r = report(cfg, "single-finger verification at the Dev-tuned FMR threshold", out.single, &hash);
    write_report(&reports, "evaluate", &r, &hash)?;
    print!("{}", r.to_table());
    println!("config_hash {hash}");
    Ok(())
}

pub fn fuse(cfg: &RunConfig) -> Result<()> {
    let hash = cfg.hash();
    let path = cfg.out_dir("scores").join("scores.json");
    let file: ScoreFile = read_json(&path)?;
    if file.config_hash != hash {
        return Err(Error::Config(format!("{} was produced under config {}, current config is {hash}; rerun evaluate", path.display(), file.config_hash)));
    }
    let mut rows = Vec::new();
    let mut models = Vec::new();
    let mut dropped = 0;
    for &id in &cfg.eval.protocols {
        let split = |s: Split| file.records.iter().filter(|r| r.protocol == id && r.split == s).cloned().collect::<Vec<_>>();
        let (dev, eval) = (fuse_fingers(&split(Split::Dev)), fuse_fingers(&split(Split::Eval)));
        if dev.vectors.is_empty() && eval.vectors.is_empty() {
            continue;
        }
        dropped += dev.dropped + eval.dropped;
        let (model, row) = evaluate_fusion(id, &dev.vectors, &eval.vectors, &cfg.eval.svm, cfg.eval.target_fmr)?;
        rows.push(row);
        models.push(json!({ "protocol": id, "model": model }));
    }
    let reports = cfg.out_dir("reports");
    create_dir(&reports)?;
    let r = report(cfg, "three-finger SVM fusion at the Dev-tuned FMR threshold", rows, &hash);
    write_report(&reports, "fusion", &r, &hash)?;
    write_json(&reports.join("fusion_models.json"), &json!({ "config_hash": hash, "dropped_groups": dropped, "models": models }))?;
    print!("{}", r.to_table());
    if dropped > 0 {
        println!("{dropped} probe/claim groups lacked a finger score and were dropped");
    }
    println!("config_hash {hash}");
    Ok(())
}
