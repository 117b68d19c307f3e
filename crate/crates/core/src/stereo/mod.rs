//! Semi-global matching on rectified pairs.
//!
//! The matching cost is the Hamming distance between census codes. The
//! aggregated volume is reduced by integer addition, so the output does not
//! depend on how rayon schedules the work.

mod census;
pub mod io;
mod select;
mod sgm;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::RectifiedRig;
use crate::imgcore::{BinaryMask, ImageGray};
use crate::scalar::Real;

pub use census::census_transform;
pub use select::{disparity_select, parabola_offset};
pub use sgm::{aggregate_sgm, matching_cost, AggregatedVolume, CostVolume};

/// Disparity written to invalid pixels.
pub const INVALID_DISPARITY: f32 = -1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum PathCount {
    Four,
    Eight,
}

impl PathCount {
    pub fn count(self) -> usize {
        match self {
            PathCount::Four => 4,
            PathCount::Eight => 8,
        }
    }
}

impl TryFrom<u8> for PathCount {
    type Error = Error;
    fn try_from(v: u8) -> Result<Self> {
        match v {
            4 => Ok(PathCount::Four),
            8 => Ok(PathCount::Eight),
            _ => Err(Error::InvalidParam(format!("paths must be 4 or 8, got {v}"))),
        }
    }
}

impl From<PathCount> for u8 {
    fn from(p: PathCount) -> u8 {
        p.count() as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SgmParams {
    /// Inclusive search range in pixels.
    pub d_min: usize,
    pub d_max: usize,
    pub p1: u16,
    pub p2: u16,
    pub paths: PathCount,
    pub census_window: usize,
    pub lr_max_diff: f32,
    pub uniqueness_ratio: f32,
}

impl Default for SgmParams {
    fn default() -> Self {
        let census_window = 5;
        let p1 = default_p1(census_window);
        SgmParams {
            d_min: 0,
            d_max: 63,
            p1,
            p2: 4 * p1,
            paths: PathCount::Eight,
            census_window,
            lr_max_diff: 1.0,
            uniqueness_ratio: 0.95,
        }
    }
}

/// `8 · bits / 64`, rounded, at least 1.
pub fn default_p1(census_window: usize) -> u16 {
    let bits = census_window * census_window - 1;
    ((8 * bits + 32) / 64).max(1) as u16
}

impl SgmParams {
    pub fn ndisp(&self) -> usize {
        self.d_max - self.d_min + 1
    }

    pub fn census_bits(&self) -> usize {
        self.census_window * self.census_window - 1
    }

    pub fn validate(&self) -> Result<()> {
        if self.d_min >= self.d_max {
            return Err(Error::InvalidParam("d_min must be below d_max".into()));
        }
        if !(self.p1 > 0 && self.p1 < self.p2) {
            return Err(Error::InvalidParam("penalties must satisfy 0 < P1 < P2".into()));
        }
        if self.census_window < 3 || self.census_window % 2 == 0 || self.census_bits() > 64 {
            return Err(Error::InvalidParam("census window must be odd, between 3 and 7".into()));
        }
        let worst = (self.census_bits() + self.p2 as usize) * self.paths.count();
        if worst > u16::MAX as usize {
            return Err(Error::InvalidParam("P2 too large for 16-bit aggregation".into()));
        }
        if !(self.lr_max_diff >= 0.0) || !(self.uniqueness_ratio > 0.0 && self.uniqueness_ratio <= 1.0) {
            return Err(Error::InvalidParam("lr_max_diff must be ≥ 0 and uniqueness_ratio in (0, 1]".into()));
        }
        Ok(())
    }

    /// Search range covering depths `z_near..=z_far` (mm) on `rig`.
    pub fn with_depth_range<T: Real>(mut self, rig: &RectifiedRig<T>, z_near: T, z_far: T) -> Result<Self> {
        let near = rig.depth_to_disparity(z_near).ok_or_else(|| Error::InvalidParam("z_near must be positive".into()))?;
        let far = rig.depth_to_disparity(z_far).ok_or_else(|| Error::InvalidParam("z_far must be positive".into()))?;
        let (lo, hi) = if near < far { (near, far) } else { (far, near) };
        self.d_min = lo.floor().max(T::zero()).as_f64() as usize;
        self.d_max = hi.ceil().as_f64() as usize;
        if self.d_max <= self.d_min {
            self.d_max = self.d_min + 1;
        }
        Ok(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DisparityMap {
    pub width: usize,
    pub height: usize,
    /// Row-major subpixel disparity, [`INVALID_DISPARITY`] where invalid.
    pub d: Vec<f32>,
    pub valid: BinaryMask,
    pub d_min: usize,
    pub d_max: usize,
}

impl DisparityMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> Option<f32> {
        self.valid.get(x, y).then(|| self.d[y * self.width + x])
    }

    /// Bitwise equality, including sentinel values.
    pub fn bitwise_eq(&self, other: &DisparityMap) -> bool {
        self.width == other.width
            && self.height == other.height
            && self.valid == other.valid
            && self.d.iter().zip(&other.d).all(|(a, b)| a.to_bits() == b.to_bits())
    }

    /// `Σ|∇d|` over horizontally and vertically adjacent valid pairs.
    pub fn total_variation(&self) -> f64 {
        let mut tv = 0.0;
        for y in 0..self.height {
            for x in 0..self.width {
                let Some(a) = self.get(x, y) else { continue };
                if let Some(b) = (x + 1 < self.width).then(|| self.get(x + 1, y)).flatten() {
                    tv += (a - b).abs() as f64;
                }
                if let Some(b) = (y + 1 < self.height).then(|| self.get(x, y + 1)).flatten() {
                    tv += (a - b).abs() as f64;
                }
            }
        }
        tv
    }
}

/// Cost, aggregation and selection in one call.
pub fn compute_disparity(left: &ImageGray, right: &ImageGray, params: &SgmParams) -> Result<DisparityMap> {
    params.validate()?;
    let cost = matching_cost(left, right, params)?;
    let agg = aggregate_sgm(&cost, params);
    Ok(disparity_select(&agg, params))
}

/// Per-pixel winner of the raw cost volume, without any validity gating.
pub fn raw_wta(cost: &CostVolume) -> Vec<usize> {
    (0..cost.width * cost.height)
        .map(|i| {
            let c = &cost.data[i * cost.ndisp..(i + 1) * cost.ndisp];
            cost.d_min + (0..c.len()).min_by_key(|&d| (c[d], d)).unwrap_or(0)
        })
        .collect()
}

/// Per-pixel winner of the aggregated volume, without any validity gating.
pub fn aggregated_wta(agg: &AggregatedVolume) -> Vec<usize> {
    (0..agg.width * agg.height)
        .map(|i| {
            let c = &agg.data[i * agg.ndisp..(i + 1) * agg.ndisp];
            agg.d_min + (0..c.len()).min_by_key(|&d| (c[d], d)).unwrap_or(0)
        })
        .collect()
}
