//! Calibrated photometric stereo under distant lights.
//!
//! Image axes are x right and y down; normals point toward the camera
//! (`n_z > 0`). Light directions point from the surface toward the light.

mod flatfield;
mod integrate;
pub mod io;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, ImageGray};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

pub use flatfield::{flatfield_calibrate, FlatField};
pub use integrate::integrate_depth;

/// Samples at or above this fraction of full scale count as saturated.
pub const SATURATION_FRACTION: f64 = 0.98;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LightSet<T> {
    directions: Vec<Vec3<T>>,
}

impl<T: Real> LightSet<T> {
    /// Normalizes the given directions and checks that they span 3-D.
    pub fn new(directions: Vec<Vec3<T>>) -> Result<Self> {
        if directions.len() < 3 {
            return Err(Error::DegenerateLights);
        }
        let directions = directions.iter().map(|d| d.normalized().ok_or(Error::DegenerateLights)).collect::<Result<Vec<_>>>()?;
        let set = LightSet { directions };
        if set.gram().det().abs() < T::lit(1e-6) {
            return Err(Error::DegenerateLights);
        }
        Ok(set)
    }

    /// One light per corner of a `width × height` bank (mm) centred on the
    /// optical axis, seen from a surface `distance` mm away. Corners are
    /// ordered top-left, top-right, bottom-left, bottom-right in image axes.
    pub fn corner_banks(width: T, height: T, distance: T) -> Result<Self> {
        let (a, b) = (width / T::lit(2.0), height / T::lit(2.0));
        LightSet::new(vec![
            Vec3::new(-a, -b, distance),
            Vec3::new(a, -b, distance),
            Vec3::new(-a, b, distance),
            Vec3::new(a, b, distance),
        ])
    }

    pub fn directions(&self) -> &[Vec3<T>] {
        &self.directions
    }

    pub fn len(&self) -> usize {
        self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    /// `LᵀL`.
    fn gram(&self) -> Mat3<T> {
        let mut g = Mat3::zero();
        for l in &self.directions {
            for i in 0..3 {
                for j in 0..3 {
                    g[(i, j)] = g[(i, j)] + l[i] * l[j];
                }
            }
        }
        g
    }

    /// Rows of the pseudo-inverse `(LᵀL)⁻¹Lᵀ`, one 3-vector per light.
    fn pseudo_inverse(&self) -> Result<Vec<Vec3<T>>> {
        let inv = self.gram().inverse().ok_or(Error::DegenerateLights)?;
        Ok(self.directions.iter().map(|l| inv.mul_vec(l)).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalField<T> {
    pub width: usize,
    pub height: usize,
    /// Unit normals, zero where invalid.
    pub n: Vec<Vec3<T>>,
    pub albedo: Vec<T>,
    pub valid: BinaryMask,
}

impl<T: Real> NormalField<T> {
    #[inline]
    pub fn normal(&self, x: usize, y: usize) -> Option<Vec3<T>> {
        self.valid.get(x, y).then(|| self.n[y * self.width + x])
    }

    /// Angle in degrees between valid normals of two fields at pixel `i`.
    pub fn angle_to(&self, i: usize, other: &Vec3<T>) -> T {
        angle_deg(&self.n[i], other)
    }
}

pub fn angle_deg<T: Real>(a: &Vec3<T>, b: &Vec3<T>) -> T {
    // atan2 of cross and dot stays accurate for tiny angles
    a.cross(b).norm().atan2(a.dot(b)).to_degrees()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PsParams<T> {
    /// Minimum albedo, in intensity units, for a pixel to be valid.
    pub min_albedo: T,
    pub saturation_fraction: f64,
}

impl<T: Real> Default for PsParams<T> {
    fn default() -> Self {
        PsParams { min_albedo: T::lit(1e-3), saturation_fraction: SATURATION_FRACTION }
    }
}

/// Least-squares `G = ρ·n` per pixel with default thresholds.
pub fn ps_normals<T: Real>(frames: &[ImageGray], lights: &LightSet<T>, ff: Option<&FlatField<T>>) -> Result<NormalField<T>> {
    ps_normals_with(frames, lights, ff, &PsParams::default())
}

pub fn ps_normals_with<T: Real>(
    frames: &[ImageGray],
    lights: &LightSet<T>,
    ff: Option<&FlatField<T>>,
    params: &PsParams<T>,
) -> Result<NormalField<T>> {
    if frames.len() != lights.len() {
        return Err(Error::DimensionMismatch(format!("{} frames for {} lights", frames.len(), lights.len())));
    }
    let pinv = lights.pseudo_inverse()?;
    let (w, h) = (frames[0].width(), frames[0].height());
    if frames.iter().any(|f| f.width() != w || f.height() != h) {
        return Err(Error::DimensionMismatch("frames differ in size".into()));
    }
    if let Some(ff) = ff {
        if ff.width != w || ff.height != h || ff.gains.len() != frames.len() {
            return Err(Error::DimensionMismatch("flat field does not match frames".into()));
        }
    }
    let sat: Vec<u16> = frames.iter().map(|f| (params.saturation_fraction * f.full_scale() as f64).ceil() as u16).collect();

    let results: Vec<Option<(Vec3<T>, T)>> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let mut g = Vec3::zero();
            for (k, f) in frames.iter().enumerate() {
                let raw = f.data()[i];
                if raw >= sat[k] {
                    return None;
                }
                let mut v = T::from_u16(raw).expect("u16 fits");
                if let Some(ff) = ff {
                    if !ff.valid.bits()[i] {
                        return None;
                    }
                    v = v * ff.gains[k][i];
                }
                g = g + pinv[k].scale(v);
            }
            let rho = g.norm();
            if !(rho >= params.min_albedo) || rho <= T::zero() {
                return None;
            }
            Some((g.scale(T::one() / rho), rho))
        })
        .collect();

    let mut n = vec![Vec3::zero(); w * h];
    let mut albedo = vec![T::zero(); w * h];
    let mut valid = vec![false; w * h];
    for (i, r) in results.into_iter().enumerate() {
        if let Some((ni, rho)) = r {
            n[i] = ni;
            albedo[i] = rho;
            valid[i] = true;
        }
    }
    Ok(NormalField { width: w, height: h, n, albedo, valid: BinaryMask::from_vec(w, h, valid)? })
}

/// `‖I − L·G‖` at pixel `i` for the recovered field.
pub fn residual<T: Real>(frames: &[ImageGray], lights: &LightSet<T>, field: &NormalField<T>, i: usize) -> T {
    let g = field.n[i].scale(field.albedo[i]);
    lights
        .directions()
        .iter()
        .zip(frames)
        .map(|(l, f)| {
            let r = T::from_u16(f.data()[i]).expect("u16 fits") - l.dot(&g);
            r * r
        })
        .sum::<T>()
        .sqrt()
}
