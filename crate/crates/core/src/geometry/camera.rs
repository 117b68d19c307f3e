//! Pinhole camera with the 5-coefficient radial/tangential distortion model
//! `(k1, k2, p1, p2, k3)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, ImageGray};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics<T> {
    /// Projection matrix; last row is `(0, 0, 1)`.
    pub k: Mat3<T>,
    /// `[k1, k2, p1, p2, k3]`.
    pub dist: [T; 5],
    pub image_size: (usize, usize),
}

impl<T: Real> CameraIntrinsics<T> {
    pub fn new(fx: T, fy: T, cx: T, cy: T, dist: [T; 5], image_size: (usize, usize)) -> Self {
        let (z, o) = (T::zero(), T::one());
        Self { k: Mat3([[fx, z, cx], [z, fy, cy], [z, z, o]]), dist, image_size }
    }

    pub fn ideal(f: T, width: usize, height: usize) -> Self {
        let half = |n: usize| T::from_usize_lossy(n - 1) * T::lit(0.5);
        Self::new(f, f, half(width), half(height), [T::zero(); 5], (width, height))
    }

    #[inline]
    pub fn fx(&self) -> T {
        self.k[(0, 0)]
    }
    #[inline]
    pub fn fy(&self) -> T {
        self.k[(1, 1)]
    }
    #[inline]
    pub fn cx(&self) -> T {
        self.k[(0, 2)]
    }
    #[inline]
    pub fn cy(&self) -> T {
        self.k[(1, 2)]
    }

    pub fn validate(&self) -> Result<()> {
        let k = &self.k;
        if !(self.fx() > T::zero() && self.fy() > T::zero()) {
            return Err(Error::InvalidCalibration("focal lengths must be positive".into()));
        }
        if k[(2, 0)] != T::zero() || k[(2, 1)] != T::zero() || k[(2, 2)] != T::one() {
            return Err(Error::InvalidCalibration("camera matrix last row must be (0, 0, 1)".into()));
        }
        if k.to_row_vec().iter().chain(self.dist.iter()).any(|v| !v.is_finite()) {
            return Err(Error::InvalidCalibration("non-finite calibration value".into()));
        }
        Ok(())
    }

    pub fn has_distortion(&self) -> bool {
        self.dist.iter().any(|&d| d != T::zero())
    }

    /// Applies the distortion model to normalized image coordinates.
    pub fn distort_normalized(&self, x: T, y: T) -> (T, T) {
        let [k1, k2, p1, p2, k3] = self.dist;
        let two = T::lit(2.0);
        let r2 = x * x + y * y;
        let radial = T::one() + r2 * (k1 + r2 * (k2 + r2 * k3));
        let xd = x * radial + two * p1 * x * y + p2 * (r2 + two * x * x);
        let yd = y * radial + p1 * (r2 + two * y * y) + two * p2 * x * y;
        (xd, yd)
    }

    /// Inverts [`Self::distort_normalized`] by fixed-point iteration.
    pub fn undistort_normalized(&self, xd: T, yd: T) -> (T, T) {
        if !self.has_distortion() {
            return (xd, yd);
        }
        let [k1, k2, p1, p2, k3] = self.dist;
        let two = T::lit(2.0);
        let (mut x, mut y) = (xd, yd);
        for _ in 0..100 {
            let r2 = x * x + y * y;
            let radial = T::one() + r2 * (k1 + r2 * (k2 + r2 * k3));
            let dx = two * p1 * x * y + p2 * (r2 + two * x * x);
            let dy = p1 * (r2 + two * y * y) + two * p2 * x * y;
            let nx = (xd - dx) / radial;
            let ny = (yd - dy) / radial;
            let step = (nx - x).abs() + (ny - y).abs();
            x = nx;
            y = ny;
            if step < T::epsilon() * T::lit(4.0) {
                break;
            }
        }
        (x, y)
    }

    /// Projects a point in camera coordinates to distorted pixel coordinates.
    pub fn project(&self, p: &Vec3<T>) -> Option<(T, T)> {
        if p.z() <= T::zero() {
            return None;
        }
        let (xd, yd) = self.distort_normalized(p.x() / p.z(), p.y() / p.z());
        Some((self.fx() * xd + self.cx(), self.fy() * yd + self.cy()))
    }

    /// Ray (z = 1) through a distorted pixel.
    pub fn pixel_to_ray(&self, u: T, v: T) -> Vec3<T> {
        let xd = (u - self.cx()) / self.fx();
        let yd = (v - self.cy()) / self.fy();
        let (x, y) = self.undistort_normalized(xd, yd);
        Vec3::new(x, y, T::one())
    }

    /// Pixel position in the distorted image of the ideal pixel `(u, v)`.
    pub fn distort_pixel(&self, u: T, v: T) -> (T, T) {
        let x = (u - self.cx()) / self.fx();
        let y = (v - self.cy()) / self.fy();
        let (xd, yd) = self.distort_normalized(x, y);
        (self.fx() * xd + self.cx(), self.fy() * yd + self.cy())
    }

    pub fn undistort_pixel(&self, u: T, v: T) -> (T, T) {
        let r = self.pixel_to_ray(u, v);
        (self.fx() * r.x() + self.cx(), self.fy() * r.y() + self.cy())
    }
}

/// Removes lens distortion. Output pixels whose source falls outside the
/// input are 0 and cleared in the returned validity mask.
pub fn undistort<T: Real>(img: &ImageGray, intr: &CameraIntrinsics<T>) -> (ImageGray, BinaryMask) {
    let (w, h) = (img.width(), img.height());
    let mut out = ImageGray::new(w, h, img.bit_depth());
    let mut valid = BinaryMask::new(w, h);
    for v in 0..h {
        for u in 0..w {
            let (su, sv) = intr.distort_pixel(T::from_usize_lossy(u), T::from_usize_lossy(v));
            if let Some(val) = img.sample_bilinear(su, sv) {
                out.set(u, v, val.round().to_u16().unwrap_or(0));
                valid.set(u, v, true);
            }
        }
    }
    (out, valid)
}

/// Relative pose of the right camera: `X_right = R · X_left + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StereoExtrinsics<T> {
    pub rotation: Mat3<T>,
    /// Millimetres.
    pub translation: Vec3<T>,
}

impl<T: Real> StereoExtrinsics<T> {
    pub fn validate(&self) -> Result<()> {
        let tol = T::lit(1e-6).max(T::epsilon() * T::lit(100.0));
        if self.rotation.orthonormality_error() > tol || (self.rotation.det() - T::one()).abs() > tol {
            return Err(Error::InvalidCalibration("rotation is not a proper orthonormal matrix".into()));
        }
        if !(self.translation.norm() > T::zero()) {
            return Err(Error::DegenerateExtrinsics("|t| = 0".into()));
        }
        Ok(())
    }

    /// Centre of the second camera expressed in the first camera's frame.
    pub fn camera_center(&self) -> Vec3<T> {
        -self.rotation.transpose().mul_vec(&self.translation)
    }

    pub fn to_second(&self, p: &Vec3<T>) -> Vec3<T> {
        self.rotation.mul_vec(p) + self.translation
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::BitDepth;

    fn cam(k1: f64, p1: f64) -> CameraIntrinsics<f64> {
        CameraIntrinsics::new(300.0, 300.0, 160.0, 120.0, [k1, 0.01, p1, -0.0005, 0.0], (320, 240))
    }

    #[test]
    fn undistort_point_inverts_distortion() {
        for k1 in [-0.3, -0.1, 0.0, 0.2, 0.3] {
            let c = cam(k1, 0.001);
            for &(x, y) in &[(0.1, 0.2), (-0.4, 0.3), (0.45, -0.35), (0.0, 0.0)] {
                let (xd, yd) = c.distort_normalized(x, y);
                let (ux, uy) = c.undistort_normalized(xd, yd);
                assert!((ux - x).abs() < 1e-10 && (uy - y).abs() < 1e-10, "k1={k1} ({x},{y})");
            }
        }
    }

    #[test]
    fn zero_distortion_is_identity() {
        let img = ImageGray::from_fn(40, 30, BitDepth::Ten, |x, y| ((x * 31 + y * 17) % 1000) as u16);
        let c = CameraIntrinsics::<f64>::ideal(50.0, 40, 30);
        let (out, valid) = undistort(&img, &c);
        assert_eq!(out, img);
        assert_eq!(valid.count(), 40 * 30);
    }

    #[test]
    fn tangential_p1_shifts_rows() {
        // pure p1: y_d = y + p1 (r² + 2y²), x_d = x + 2 p1 x y
        let c = CameraIntrinsics::<f64>::new(200.0, 200.0, 100.0, 100.0, [0.0, 0.0, 0.01, 0.0, 0.0], (200, 200));
        let (x, y): (f64, f64) = (0.2, -0.3);
        let (xd, yd) = c.distort_normalized(x, y);
        assert!((xd - (x + 2.0 * 0.01 * x * y)).abs() < 1e-15);
        assert!((yd - (y + 0.01 * (x * x + y * y + 2.0 * y * y))).abs() < 1e-15);
        // a pixel on the optical column moves only vertically
        let (u, v) = c.distort_pixel(100.0, 160.0);
        assert!((u - 100.0).abs() < 1e-12);
        let yn: f64 = 0.3;
        assert!((v - (100.0 + 200.0 * (yn + 0.01 * 3.0 * yn * yn))).abs() < 1e-9);
    }

    #[test]
    fn distorted_grid_is_straightened() {
        // render straight lines as seen through a k1 lens, then undistort
        let c = CameraIntrinsics::new(220.0, 220.0, 160.0, 120.0, [-0.25, 0.0, 0.0, 0.0, 0.0], (320, 240));
        let line_rows = [40.0, 80.0, 160.0, 200.0];
        let distorted = ImageGray::from_fn(320, 240, BitDepth::Eight, |u, v| {
            let (_, iv) = c.undistort_pixel(u as f64, v as f64);
            let near = line_rows.iter().any(|&r| (iv - r).abs() < 1.2);
            if near { 255 } else { 0 }
        });
        let (out, _) = undistort(&distorted, &c);
        for &r in &line_rows {
            // centroid row of the line at several columns must be ~ r
            for u in (40..280).step_by(20) {
                let (mut s, mut n) = (0.0, 0.0);
                for v in (r as usize - 5)..(r as usize + 6) {
                    let w = out.get(u, v) as f64;
                    s += w * v as f64;
                    n += w;
                }
                assert!(n > 0.0);
                assert!((s / n - r).abs() < 0.5, "row {r} col {u}: {}", s / n);
            }
        }
    }

    #[test]
    fn extrinsics_validation() {
        let e = StereoExtrinsics { rotation: Mat3::<f64>::identity(), translation: Vec3::zero() };
        assert!(matches!(e.validate(), Err(Error::DegenerateExtrinsics(_))));
        let e = StereoExtrinsics::<f64> { rotation: Mat3::identity(), translation: Vec3::new(-60.0, 0.0, 0.0) };
        assert!(e.validate().is_ok());
        assert!((e.camera_center().x() - 60.0).abs() < 1e-12);
    }
}
