use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::{Camera, Finger, Hand, Wavelength};
use crate::error::{Error, Result};
use crate::geometry::{undistort, CameraIntrinsics};
use crate::imgcore::io::{decode_mask_png, encode_mask_png, write_atomic};
use crate::imgcore::{BinaryMask, ImageGray};

use super::enhance::{enhance, Enhancer};
use super::mc::extract_mc;
use super::normalize::normalize_finger;
use super::segment::{reorder_fingers, segment_fingers};
use super::FvrConfig;

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateSource {
    pub subject: u32,
    pub hand: Hand,
    pub camera: Camera,
    pub wavelength: Wavelength,
    pub sample: u32,
    pub frame: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerTemplate {
    pub mc_map: BinaryMask,
    pub finger: Finger,
    pub source: TemplateSource,
    pub config_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum TemplateOutcome {
    /// Exactly one template per evaluated finger, in finger order.
    Templates(Vec<FingerTemplate>),
    Excluded { fingers_found: usize },
}

impl TemplateOutcome {
    pub fn templates(&self) -> &[FingerTemplate] {
        match self {
            TemplateOutcome::Templates(t) => t,
            TemplateOutcome::Excluded { .. } => &[],
        }
    }

    pub fn is_excluded(&self) -> bool {
        matches!(self, TemplateOutcome::Excluded { .. })
    }
}

/// Segment, reorder, normalize, enhance and extract features from one frame.
/// Only the index, middle and ring fingers produce templates; a frame with
/// any finger count other than four is excluded.
pub fn build_template(
    frame: &ImageGray,
    source: &TemplateSource,
    intrinsics: Option<&CameraIntrinsics<f64>>,
    enhancer: &dyn Enhancer,
    config: &FvrConfig,
    config_hash: &str,
) -> Result<TemplateOutcome> {
    let undistorted;
    let img = match intrinsics {
        Some(k) if k.has_distortion() => {
            undistorted = undistort(frame, k).0;
            &undistorted
        }
        _ => frame,
    };
    let regions = segment_fingers(img, &config.segment)?;
    let ordered = match reorder_fingers(regions, source.hand) {
        Ok(r) => r,
        Err(Error::SampleExcluded(n)) => return Ok(TemplateOutcome::Excluded { fingers_found: n }),
        Err(e) => return Err(e),
    };
    let mut out = Vec::with_capacity(3);
    for region in ordered.iter().filter(|r| r.finger.is_some_and(|f| Finger::EVALUATED.contains(&f))) {
        let norm = normalize_finger(img, region, &config.normalize)?;
        let enhanced = enhance(&norm.image, enhancer);
        let mc_map = extract_mc(&enhanced, &norm.mask, &config.mc)?;
        out.push(FingerTemplate {
            mc_map,
            finger: region.finger.expect("labelled"),
            source: source.clone(),
            config_hash: config_hash.to_string(),
        });
    }
    Ok(TemplateOutcome::Templates(out))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TemplateHeader {
    pub finger: Finger,
    pub source: TemplateSource,
    pub config_hash: String,
    pub width: usize,
    pub height: usize,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Writes `<stem>.png` (1-bit) and `<stem>.json`.
pub fn save_template(t: &FingerTemplate, stem: &Path) -> Result<()> {
    write_atomic(&with_suffix(stem, ".png"), &encode_mask_png(&t.mc_map)?)?;
    let header = TemplateHeader {
        finger: t.finger,
        source: t.source.clone(),
        config_hash: t.config_hash.clone(),
        width: t.mc_map.width(),
        height: t.mc_map.height(),
    };
    write_atomic(&with_suffix(stem, ".json"), &serde_json::to_vec_pretty(&header)?)
}

pub fn load_template(stem: &Path) -> Result<FingerTemplate> {
    let read = |p: PathBuf| fs::read(&p).map_err(|e| Error::io(&p, e));
    let header: TemplateHeader = serde_json::from_slice(&read(with_suffix(stem, ".json"))?)?;
    let mc_map = decode_mask_png(&read(with_suffix(stem, ".png"))?)?;
    if mc_map.width() != header.width || mc_map.height() != header.height {
        return Err(Error::DimensionMismatch("template image disagrees with header".into()));
    }
    Ok(FingerTemplate { mc_map, finger: header.finger, source: header.source, config_hash: header.config_hash })
}

/// Conventional file stem for a template.
pub fn template_stem(dir: &Path, t: &FingerTemplate) -> PathBuf {
    finger_stem(dir, &t.source, t.finger)
}

/// File stem of the `finger` template extracted from `s`.
pub fn finger_stem(dir: &Path, s: &TemplateSource, finger: Finger) -> PathBuf {
    dir.join(format!("s{:04}_{}_{}_{}_n{}_f{}_{}", s.subject, s.hand, s.camera, s.wavelength, s.sample, s.frame, finger))
}
