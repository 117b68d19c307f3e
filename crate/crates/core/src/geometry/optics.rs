//! Lens design calculators: depth of field and field of view.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Thin-lens parameters, all lengths in millimetres.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OpticsSpec<T> {
    pub focal_length: T,
    pub f_number: T,
    pub circle_of_confusion: T,
    pub focus_distance: T,
    pub sensor_width: T,
    pub sensor_height: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthOfField<T> {
    pub hyperfocal: T,
    pub near: T,
    /// `+∞` when focused at or beyond the hyperfocal distance.
    pub far: T,
    pub depth: T,
}

impl<T: Real> OpticsSpec<T> {
    pub fn validate(&self) -> Result<()> {
        let all = [
            self.focal_length,
            self.f_number,
            self.circle_of_confusion,
            self.focus_distance,
            self.sensor_width,
            self.sensor_height,
        ];
        if all.iter().any(|v| !(v.is_finite() && *v > T::zero())) {
            return Err(Error::InvalidParam("optics parameters must be positive".into()));
        }
        if self.focus_distance <= self.focal_length {
            return Err(Error::InvalidParam("focus distance must exceed focal length".into()));
        }
        Ok(())
    }
}

/// Hyperfocal distance, near/far sharpness limits and depth of field.
pub fn dof_calc<T: Real>(spec: &OpticsSpec<T>) -> Result<DepthOfField<T>> {
    spec.validate()?;
    let f = spec.focal_length;
    let s = spec.focus_distance;
    let two = T::lit(2.0);
    let hyperfocal = f * f / (spec.f_number * spec.circle_of_confusion) + f;
    let near = s * (hyperfocal - f) / (hyperfocal + s - two * f);
    let far = if s >= hyperfocal { T::infinity() } else { s * (hyperfocal - f) / (hyperfocal - s) };
    Ok(DepthOfField { hyperfocal, near, far, depth: far - near })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldOfView<T> {
    /// Full angles of view in degrees: horizontal, vertical, diagonal.
    pub angle_h: T,
    pub angle_v: T,
    pub angle_d: T,
    /// First-order linear coverage at the working distance, millimetres.
    pub fov_h: T,
    pub fov_v: T,
    pub fov_d: T,
}

pub fn fov_calc<T: Real>(focal_length: T, sensor_width: T, sensor_height: T, distance: T) -> Result<FieldOfView<T>> {
    if [focal_length, sensor_width, sensor_height, distance].iter().any(|v| !(v.is_finite() && *v > T::zero())) {
        return Err(Error::InvalidParam("field-of-view inputs must be positive".into()));
    }
    let two = T::lit(2.0);
    let diag = sensor_width.hypot(sensor_height);
    let angle = |dim: T| (two * (dim / (two * focal_length)).atan()).to_degrees();
    let fov_h = distance * sensor_width / focal_length;
    let fov_v = distance * sensor_height / focal_length;
    Ok(FieldOfView {
        angle_h: angle(sensor_width),
        angle_v: angle(sensor_height),
        angle_d: angle(diag),
        fov_h,
        fov_v,
        fov_d: fov_h.hypot(fov_v),
    })
}
