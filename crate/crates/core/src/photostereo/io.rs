//! Normal fields on disk: `<stem>.normals.png` (RGB16, `[−1, 1] → [0, 65535]`),
//! `<stem>.albedo.png` (16-bit, `round(albedo · albedo_scale)`),
//! `<stem>.valid.png` and a JSON header.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::io::{decode_mask_png, decode_png, decode_rgb_png, encode_mask_png, encode_png, encode_rgb_png, write_atomic};
use crate::imgcore::{BitDepth, ImageGray, ImageRgb};
use crate::linalg::Vec3;
use crate::scalar::Real;

use super::NormalField;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormalHeader {
    pub width: usize,
    pub height: usize,
    pub albedo_scale: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

const FULL: f64 = 65535.0;

fn encode_unit(v: f64) -> u16 {
    ((v.clamp(-1.0, 1.0) + 1.0) / 2.0 * FULL).round() as u16
}

fn decode_unit(v: u16) -> f64 {
    v as f64 / FULL * 2.0 - 1.0
}

/// `albedo_scale` is chosen so the largest valid albedo maps near full range.
pub fn save_normals<T: Real>(field: &NormalField<T>, stem: &Path, config_hash: Option<&str>) -> Result<()> {
    let (w, h) = (field.width, field.height);
    let max_albedo = field
        .albedo
        .iter()
        .zip(field.valid.bits())
        .filter(|(_, &v)| v)
        .map(|(a, _)| a.as_f64())
        .fold(0.0, f64::max);
    let albedo_scale = if max_albedo > 0.0 { FULL / max_albedo } else { 1.0 };
    let mut rgb = ImageRgb::new(w, h, BitDepth::Sixteen);
    for (px, n) in rgb.data.iter_mut().zip(&field.n) {
        *px = [encode_unit(n.x().as_f64()), encode_unit(n.y().as_f64()), encode_unit(n.z().as_f64())];
    }
    let albedo = ImageGray::from_vec(
        w,
        h,
        BitDepth::Sixteen,
        field.albedo.iter().map(|a| (a.as_f64() * albedo_scale).round().clamp(0.0, FULL) as u16).collect(),
    )?;
    write_atomic(&with_suffix(stem, ".normals.png"), &encode_rgb_png(&rgb)?)?;
    write_atomic(&with_suffix(stem, ".albedo.png"), &encode_png(&albedo)?)?;
    write_atomic(&with_suffix(stem, ".valid.png"), &encode_mask_png(&field.valid)?)?;
    let header = NormalHeader { width: w, height: h, albedo_scale, config_hash: config_hash.map(str::to_owned) };
    write_atomic(&with_suffix(stem, ".json"), &serde_json::to_vec_pretty(&header)?)
}

pub fn load_normals<T: Real>(stem: &Path) -> Result<(NormalField<T>, NormalHeader)> {
    let read = |s: &str| {
        let p = with_suffix(stem, s);
        fs::read(&p).map_err(|e| Error::io(&p, e))
    };
    let header: NormalHeader = serde_json::from_slice(&read(".json")?)?;
    let rgb = decode_rgb_png(&read(".normals.png")?)?;
    let albedo = decode_png(&read(".albedo.png")?, Some(BitDepth::Sixteen))?;
    let valid = decode_mask_png(&read(".valid.png")?)?;
    let (w, h) = (header.width, header.height);
    if rgb.width != w || rgb.height != h || albedo.width() != w || albedo.height() != h || valid.width() != w || valid.height() != h {
        return Err(Error::DimensionMismatch("normal-field files disagree with header".into()));
    }
    let n = rgb
        .data
        .iter()
        .zip(valid.bits())
        .map(|(p, &ok)| {
            if !ok {
                return Vec3::zero();
            }
            let v = Vec3::new(T::lit(decode_unit(p[0])), T::lit(decode_unit(p[1])), T::lit(decode_unit(p[2])));
            v.normalized().unwrap_or(v)
        })
        .collect();
    let albedo = albedo.data().iter().map(|&a| T::lit(a as f64 / header.albedo_scale)).collect();
    Ok((NormalField { width: w, height: h, n, albedo, valid }, header))
}
