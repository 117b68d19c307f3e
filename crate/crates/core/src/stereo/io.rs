//! Disparity maps on disk: `<stem>.png` holds `round(d · 16)` as 16-bit
//! samples, `<stem>.valid.png` the validity mask and `<stem>.json` the header.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::io::{decode_mask_png, decode_png, encode_mask_png, encode_png, write_atomic};
use crate::imgcore::{BitDepth, ImageGray};

use super::{DisparityMap, INVALID_DISPARITY};

pub const DISPARITY_SCALE: u32 = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisparityHeader {
    pub width: usize,
    pub height: usize,
    pub d_min: usize,
    pub d_max: usize,
    pub scale: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

/// Paths `(values, validity, header)` for a map stored under `stem`.
pub fn disparity_paths(stem: &Path) -> (PathBuf, PathBuf, PathBuf) {
    (with_suffix(stem, ".png"), with_suffix(stem, ".valid.png"), with_suffix(stem, ".json"))
}

pub fn save_disparity(map: &DisparityMap, stem: &Path, config_hash: Option<&str>) -> Result<()> {
    let scale = DISPARITY_SCALE as f32;
    if (map.d_max as f32) * scale > u16::MAX as f32 {
        return Err(Error::InvalidParam("disparity range exceeds fixed-point storage".into()));
    }
    let data = map
        .d
        .iter()
        .zip(map.valid.bits())
        .map(|(&d, &v)| if v { (d * scale).round() as u16 } else { 0 })
        .collect();
    let img = ImageGray::from_vec(map.width, map.height, BitDepth::Sixteen, data)?;
    let (values, valid, header) = disparity_paths(stem);
    write_atomic(&values, &encode_png(&img)?)?;
    write_atomic(&valid, &encode_mask_png(&map.valid)?)?;
    let h = DisparityHeader {
        width: map.width,
        height: map.height,
        d_min: map.d_min,
        d_max: map.d_max,
        scale: DISPARITY_SCALE,
        config_hash: config_hash.map(str::to_owned),
    };
    write_atomic(&header, &serde_json::to_vec_pretty(&h)?)
}

pub fn load_disparity(stem: &Path) -> Result<(DisparityMap, DisparityHeader)> {
    let (values, valid, header) = disparity_paths(stem);
    let read = |p: &Path| fs::read(p).map_err(|e| Error::io(p, e));
    let h: DisparityHeader = serde_json::from_slice(&read(&header)?)?;
    let img = decode_png(&read(&values)?, Some(BitDepth::Sixteen))?;
    let mask = decode_mask_png(&read(&valid)?)?;
    if img.width() != h.width || img.height() != h.height || !mask_shape_ok(&mask, &h) || h.scale == 0 {
        return Err(Error::DimensionMismatch("disparity files disagree with header".into()));
    }
    let d = img
        .data()
        .iter()
        .zip(mask.bits())
        .map(|(&v, &ok)| if ok { v as f32 / h.scale as f32 } else { INVALID_DISPARITY })
        .collect();
    let map = DisparityMap { width: h.width, height: h.height, d, valid: mask, d_min: h.d_min, d_max: h.d_max };
    Ok((map, h))
}

fn mask_shape_ok(mask: &crate::imgcore::BinaryMask, h: &DisparityHeader) -> bool {
    mask.width() == h.width && mask.height() == h.height
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::BinaryMask;

    #[test]
    fn round_trip_quantizes_to_sixteenths() {
        let (w, h) = (7, 5);
        let valid = BinaryMask::from_fn(w, h, |x, y| (x + y) % 3 != 0);
        let d = (0..w * h)
            .map(|i| if valid.bits()[i] { 2.0 + i as f32 * 0.37 } else { INVALID_DISPARITY })
            .collect();
        let map = DisparityMap { width: w, height: h, d, valid, d_min: 0, d_max: 20 };
        let dir = tempfile::tempdir().unwrap();
        let stem = dir.path().join("disp");
        save_disparity(&map, &stem, Some("abc123")).unwrap();
        let (back, header) = load_disparity(&stem).unwrap();
        assert_eq!(header.config_hash.as_deref(), Some("abc123"));
        assert_eq!(back.valid, map.valid);
        for i in 0..w * h {
            if map.valid.bits()[i] {
                assert!((back.d[i] - map.d[i]).abs() <= 0.5 / 16.0 + 1e-6);
            } else {
                assert_eq!(back.d[i], INVALID_DISPARITY);
            }
        }
    }
}
