use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, ImageGray};

use super::segment::FingerRegion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormalizeParams {
    pub width: usize,
    pub height: usize,
}

impl Default for NormalizeParams {
    fn default() -> Self {
        NormalizeParams { width: 160, height: 480 }
    }
}

/// Upright finger on a fixed canvas with its mask.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedFinger {
    pub image: ImageGray,
    pub mask: BinaryMask,
    /// Rotation applied to make the finger axis vertical, degrees.
    pub rotation_deg: f64,
}

/// Rotation by `deg` about `(cx, cy)` in image coordinates:
/// `p' = c + R(θ)(p − c)` with `R = [[cos, −sin], [sin, cos]]`.
pub fn rotate_point(x: f64, y: f64, cx: f64, cy: f64, deg: f64) -> (f64, f64) {
    let (s, c) = deg.to_radians().sin_cos();
    let (dx, dy) = (x - cx, y - cy);
    (cx + c * dx - s * dy, cy + s * dx + c * dy)
}

/// Least-squares line `x = a + b·y` through the per-row edge midpoints.
/// Rows narrower than 3/4 of the median width (tip, cut corners) are left
/// out of the fit.
pub fn axis_fit(mask: &BinaryMask) -> Result<(f64, f64, usize)> {
    let mut rows = Vec::new();
    for y in 0..mask.height() {
        let mut first = None;
        let mut last = 0;
        for x in 0..mask.width() {
            if mask.get(x, y) {
                first.get_or_insert(x);
                last = x;
            }
        }
        if let Some(f) = first {
            rows.push((y, f, last));
        }
    }
    if rows.len() < 10 {
        return Err(Error::DegenerateMask(format!("{} rows", rows.len())));
    }
    let mut widths: Vec<usize> = rows.iter().map(|r| r.2 - r.1 + 1).collect();
    widths.sort_unstable();
    let min_width = 0.75 * widths[widths.len() / 2] as f64;
    let pts: Vec<(f64, f64)> =
        rows.iter().filter(|r| (r.2 - r.1 + 1) as f64 >= min_width).map(|r| (r.0 as f64, (r.1 + r.2) as f64 / 2.0)).collect();
    let n = pts.len() as f64;
    let my = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let mx = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let syy: f64 = pts.iter().map(|p| (p.0 - my).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - my) * (p.1 - mx)).sum();
    let b = sxy / syy;
    Ok((mx - b * my, b, pts.len()))
}

/// Rotates the finger about its centroid so the fitted axis is vertical and
/// centres it on the canvas without scaling; background is 0.
pub fn normalize_finger(img: &ImageGray, region: &FingerRegion, params: &NormalizeParams) -> Result<NormalizedFinger> {
    let (_, b, _) = axis_fit(&region.mask)?;
    // axis direction (b, 1) is the image of (0, 1) under R(−atan b)
    let rotation_deg = b.atan().to_degrees();
    let (cx, cy) = region.centroid;
    let (w, h) = (params.width, params.height);
    let (ox, oy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut image = ImageGray::new(w, h, img.bit_depth());
    let mut mask = BinaryMask::new(w, h);
    let full = img.full_scale() as f64;
    for v in 0..h {
        for u in 0..w {
            let (dx, dy) = rotate_point(u as f64 - ox, v as f64 - oy, 0.0, 0.0, -rotation_deg);
            let (sx, sy) = (cx + dx, cy + dy);
            let (nx, ny) = (sx.round(), sy.round());
            if nx < 0.0 || ny < 0.0 || !region.mask.get_signed(nx as isize, ny as isize) {
                continue;
            }
            let Some(val) = img.sample_bilinear::<f64>(sx, sy) else { continue };
            image.set(u, v, val.round().clamp(0.0, full) as u16);
            mask.set(u, v, true);
        }
    }
    if mask.is_empty() {
        return Err(Error::DegenerateMask("finger does not fit the canvas".into()));
    }
    Ok(NormalizedFinger { image, mask, rotation_deg })
}
