//! Stereo rectification by epipolar alignment.
//!
//! Both cameras are rotated so their x axes lie along the baseline and share
//! a common optical axis direction; both views are then re-projected with a
//! single harmonized camera matrix (mean focal length, mean principal
//! point). Corresponding points land on equal rows and
//! `disparity = baseline · focal / depth`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, ImageGray, Plane};
use crate::linalg::{Mat3, Vec3};
use crate::scalar::Real;

use super::camera::{CameraIntrinsics, StereoExtrinsics};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RectifiedRig<T> {
    pub left: CameraIntrinsics<T>,
    pub right: CameraIntrinsics<T>,
    /// Rotation from left-camera coordinates to the rectified left frame.
    pub rot_left: Mat3<T>,
    /// Rotation from right-camera coordinates to the rectified right frame.
    pub rot_right: Mat3<T>,
    /// Shared projection matrix of both rectified views.
    pub k_rect: Mat3<T>,
    /// Pixel homographies `K_rect · R · K⁻¹` (distortion excluded).
    pub homography_left: Mat3<T>,
    pub homography_right: Mat3<T>,
    /// Baseline in millimetres.
    pub baseline: T,
    /// Rectified focal length in pixels.
    pub focal: T,
    pub image_size: (usize, usize),
}

impl<T: Real> RectifiedRig<T> {
    /// Builds the rectifying rotations and the harmonized camera matrix.
    pub fn new(intr_l: &CameraIntrinsics<T>, intr_r: &CameraIntrinsics<T>, extr: &StereoExtrinsics<T>) -> Result<Self> {
        intr_l.validate()?;
        intr_r.validate()?;
        extr.validate()?;
        let center_r = extr.camera_center();
        let baseline = center_r.norm();
        let e1 = center_r.normalized().ok_or_else(|| Error::DegenerateExtrinsics("|t| = 0".into()))?;
        let axis_l = Vec3::new(T::zero(), T::zero(), T::one());
        let axis_r = extr.rotation.transpose().mul_vec(&axis_l);
        let mean_axis = (axis_l + axis_r).normalized().unwrap_or(axis_l);
        let e2 = mean_axis
            .cross(&e1)
            .normalized()
            .ok_or_else(|| Error::DegenerateExtrinsics("baseline parallel to optical axis".into()))?;
        let e3 = e1.cross(&e2);
        let rot_left = Mat3::from_rows(e1, e2, e3);
        let rot_right = rot_left * extr.rotation.transpose();

        let half = T::lit(0.5);
        let quarter = T::lit(0.25);
        let focal = (intr_l.fx() + intr_l.fy() + intr_r.fx() + intr_r.fy()) * quarter;
        let cx = (intr_l.cx() + intr_r.cx()) * half;
        let cy = (intr_l.cy() + intr_r.cy()) * half;
        let (z, o) = (T::zero(), T::one());
        let k_rect = Mat3([[focal, z, cx], [z, focal, cy], [z, z, o]]);
        let kinv = |k: &Mat3<T>| k.inverse().ok_or_else(|| Error::InvalidCalibration("singular camera matrix".into()));
        Ok(Self {
            left: *intr_l,
            right: *intr_r,
            rot_left,
            rot_right,
            k_rect,
            homography_left: k_rect * rot_left * kinv(&intr_l.k)?,
            homography_right: k_rect * rot_right * kinv(&intr_r.k)?,
            baseline,
            focal,
            image_size: intr_l.image_size,
        })
    }

    /// Rig with identical ideal cameras and a pure x baseline, as produced by
    /// synthetic renderers.
    pub fn ideal(focal: T, baseline: T, width: usize, height: usize) -> Self {
        let cam = CameraIntrinsics::ideal(focal, width, height);
        let extr = StereoExtrinsics {
            rotation: Mat3::identity(),
            translation: Vec3::new(-baseline, T::zero(), T::zero()),
        };
        Self::new(&cam, &cam, &extr).expect("ideal rig is valid")
    }

    #[inline]
    pub fn cx(&self) -> T {
        self.k_rect[(0, 2)]
    }
    #[inline]
    pub fn cy(&self) -> T {
        self.k_rect[(1, 2)]
    }

    /// `z = B · f / d`; `None` for non-positive disparity.
    pub fn disparity_to_depth(&self, d: T) -> Option<T> {
        (d > T::zero() && d.is_finite()).then(|| self.baseline * self.focal / d)
    }

    pub fn depth_to_disparity(&self, z: T) -> Option<T> {
        (z > T::zero() && z.is_finite()).then(|| self.baseline * self.focal / z)
    }

    /// Maps a raw (distorted) left pixel to rectified coordinates.
    pub fn rectify_point_left(&self, u: T, v: T) -> Option<(T, T)> {
        map_point(&self.left, &self.rot_left, &self.k_rect, u, v)
    }

    pub fn rectify_point_right(&self, u: T, v: T) -> Option<(T, T)> {
        map_point(&self.right, &self.rot_right, &self.k_rect, u, v)
    }

    /// Back-projects a rectified left pixel at depth `z` into left-camera
    /// coordinates.
    pub fn backproject_left(&self, u: T, v: T, z: T) -> Vec3<T> {
        let x = (u - self.cx()) / self.focal;
        let y = (v - self.cy()) / self.focal;
        let p_rect = Vec3::new(x * z, y * z, z);
        self.rot_left.transpose().mul_vec(&p_rect)
    }

    /// Converts a disparity plane to depth (mm); invalid pixels become NaN
    /// and are cleared in the returned mask.
    pub fn depth_map(&self, disparity: &Plane<T>, valid: &BinaryMask) -> (Plane<T>, BinaryMask) {
        let mut depth = Plane::filled(disparity.width, disparity.height, T::nan());
        let mut ok = BinaryMask::new(disparity.width, disparity.height);
        for (i, &d) in disparity.data.iter().enumerate() {
            if valid.bits()[i] {
                if let Some(z) = self.disparity_to_depth(d) {
                    depth.data[i] = z;
                    ok.bits_mut()[i] = true;
                }
            }
        }
        (depth, ok)
    }
}

fn map_point<T: Real>(intr: &CameraIntrinsics<T>, rot: &Mat3<T>, k_rect: &Mat3<T>, u: T, v: T) -> Option<(T, T)> {
    let ray = rot.mul_vec(&intr.pixel_to_ray(u, v));
    if ray.z() <= T::zero() {
        return None;
    }
    Some((
        k_rect[(0, 0)] * ray.x() / ray.z() + k_rect[(0, 2)],
        k_rect[(1, 1)] * ray.y() / ray.z() + k_rect[(1, 2)],
    ))
}

/// Warps one raw view into its rectified frame (undistortion included).
pub fn rectify_image<T: Real>(img: &ImageGray, intr: &CameraIntrinsics<T>, rot: &Mat3<T>, k_rect: &Mat3<T>) -> (ImageGray, BinaryMask) {
    let (w, h) = (img.width(), img.height());
    let mut out = ImageGray::new(w, h, img.bit_depth());
    let mut valid = BinaryMask::new(w, h);
    let rot_t = rot.transpose();
    let f = k_rect[(0, 0)];
    let (cx, cy) = (k_rect[(0, 2)], k_rect[(1, 2)]);
    for v in 0..h {
        for u in 0..w {
            let ray = Vec3::new((T::from_usize_lossy(u) - cx) / f, (T::from_usize_lossy(v) - cy) / f, T::one());
            let cam = rot_t.mul_vec(&ray);
            if let Some((su, sv)) = intr.project(&cam) {
                if let Some(val) = img.sample_bilinear(su, sv) {
                    out.set(u, v, val.round().to_u16().unwrap_or(0));
                    valid.set(u, v, true);
                }
            }
        }
    }
    (out, valid)
}

#[derive(Debug, Clone)]
pub struct RectifiedPair<T> {
    pub left: ImageGray,
    pub right: ImageGray,
    pub left_valid: BinaryMask,
    pub right_valid: BinaryMask,
    pub rig: RectifiedRig<T>,
}

pub fn rectify_pair<T: Real>(
    left: &ImageGray,
    right: &ImageGray,
    intr_l: &CameraIntrinsics<T>,
    intr_r: &CameraIntrinsics<T>,
    extr: &StereoExtrinsics<T>,
) -> Result<RectifiedPair<T>> {
    let rig = RectifiedRig::new(intr_l, intr_r, extr)?;
    let (l, lv) = rectify_image(left, intr_l, &rig.rot_left, &rig.k_rect);
    let (r, rv) = rectify_image(right, intr_r, &rig.rot_right, &rig.k_rect);
    Ok(RectifiedPair { left: l, right: r, left_valid: lv, right_valid: rv, rig })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::BitDepth;
    use rand::{Rng, SeedableRng};

    fn yaw_rig(yaw_deg: f64) -> (CameraIntrinsics<f64>, CameraIntrinsics<f64>, StereoExtrinsics<f64>) {
        let l = CameraIntrinsics::new(1180.0, 1176.0, 718.0, 542.0, [-0.12, 0.05, 0.0008, -0.0004, 0.0], (1440, 1080));
        let r = CameraIntrinsics::new(1172.0, 1170.0, 726.0, 536.0, [-0.1, 0.04, -0.0005, 0.0006, 0.0], (1440, 1080));
        let rot = Mat3::rotation(Vec3::new(0.0, 1.0, 0.0), yaw_deg.to_radians())
            * Mat3::rotation(Vec3::new(1.0, 0.0, 0.0), 0.4f64.to_radians());
        // right camera 60 mm to the right of the left one
        let center = Vec3::new(60.0, 1.5, -0.8);
        let extr = StereoExtrinsics { rotation: rot, translation: -rot.mul_vec(&center) };
        (l, r, extr)
    }

    #[test]
    fn rows_agree_for_random_points() {
        let (l, r, extr) = yaw_rig(5.0);
        let rig = RectifiedRig::new(&l, &r, &extr).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut checked = 0;
        while checked < 100 {
            let p = Vec3::new(rng.gen_range(-40.0..80.0), rng.gen_range(-50.0..50.0), rng.gen_range(90.0..200.0));
            let (Some((ul, vl)), Some((ur, vr))) = (l.project(&p), r.project(&extr.to_second(&p))) else { continue };
            if !(0.0..1440.0).contains(&ul) || !(0.0..1440.0).contains(&ur) || !(0.0..1080.0).contains(&vl) || !(0.0..1080.0).contains(&vr) {
                continue;
            }
            let (xl, yl) = rig.rectify_point_left(ul, vl).unwrap();
            let (xr, yr) = rig.rectify_point_right(ur, vr).unwrap();
            assert!((yl - yr).abs() < 0.5, "row mismatch {yl} vs {yr}");
            // disparity matches depth along the rectified axis
            let z_rect = rig.rot_left.mul_vec(&p).z();
            let d = xl - xr;
            assert!((rig.disparity_to_depth(d).unwrap() - z_rect).abs() < 1e-6 * z_rect);
            checked += 1;
        }
    }

    #[test]
    fn identity_rig_leaves_images_unchanged() {
        let cam = CameraIntrinsics::<f64>::ideal(100.0, 48, 32);
        let extr = StereoExtrinsics { rotation: Mat3::identity(), translation: Vec3::new(-50.0, 0.0, 0.0) };
        let img = ImageGray::from_fn(48, 32, BitDepth::Ten, |x, y| ((x * 13 + y * 7) % 1024) as u16);
        let pair = rectify_pair(&img, &img, &cam, &cam, &extr).unwrap();
        assert_eq!(pair.left, img);
        assert_eq!(pair.right, img);
        assert_eq!(pair.rig.rot_left, Mat3::identity());
    }

    #[test]
    fn zero_baseline_is_rejected() {
        let cam = CameraIntrinsics::<f64>::ideal(100.0, 48, 32);
        let extr = StereoExtrinsics { rotation: Mat3::identity(), translation: Vec3::zero() };
        assert!(matches!(RectifiedRig::new(&cam, &cam, &extr), Err(Error::DegenerateExtrinsics(_))));
    }

    #[test]
    fn depth_disparity_conversion() {
        let rig = RectifiedRig::<f64>::ideal(20.0, 60.0, 64, 48);
        assert!((rig.baseline * rig.focal - 1200.0).abs() < 1e-9);
        assert!((rig.disparity_to_depth(10.0).unwrap() - 120.0).abs() < 1e-12);
        assert!(rig.disparity_to_depth(0.0).is_none());
        assert!(rig.disparity_to_depth(-1.0).is_none());
        for z in [37.0, 120.0, 999.5] {
            let back = rig.disparity_to_depth(rig.depth_to_disparity(z).unwrap()).unwrap();
            assert!((back - z).abs() <= 1e-9 * z);
        }
        let mut prev = f64::INFINITY;
        for d in 1..50 {
            let z = rig.disparity_to_depth(d as f64 * 0.7).unwrap();
            assert!(z < prev);
            prev = z;
        }
    }
}
