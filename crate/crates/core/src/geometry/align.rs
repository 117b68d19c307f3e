use crate::imgcore::{bilinear, BinaryMask, ImageRgb, Plane};
use crate::scalar::Real;

use super::camera::{CameraIntrinsics, StereoExtrinsics};
use super::rectify::RectifiedRig;

/// Resamples an RGB frame into the rectified left view using per-pixel depth.
///
/// `rgb_pose` maps left-camera coordinates into the RGB camera
/// (`X_rgb = R · X_left + t`). Pixels without valid depth, or whose
/// projection leaves the RGB frame, are holes in the returned mask.
pub fn align_rgb_to_left<T: Real>(
    rgb: &ImageRgb,
    depth: &Plane<T>,
    depth_valid: &BinaryMask,
    rgb_intr: &CameraIntrinsics<T>,
    rgb_pose: &StereoExtrinsics<T>,
    rig: &RectifiedRig<T>,
) -> (ImageRgb, BinaryMask) {
    let (w, h) = (depth.width, depth.height);
    let mut out = ImageRgb::new(w, h, rgb.bit_depth);
    let mut mask = BinaryMask::new(w, h);
    for v in 0..h {
        for u in 0..w {
            if !depth_valid.get(u, v) {
                continue;
            }
            let z = depth.get(u, v);
            if !(z > T::zero() && z.is_finite()) {
                continue;
            }
            let p_left = rig.backproject_left(T::from_usize_lossy(u), T::from_usize_lossy(v), z);
            let p_rgb = rgb_pose.rotation.mul_vec(&p_left) + rgb_pose.translation;
            let Some((su, sv)) = rgb_intr.project(&p_rgb) else { continue };
            let mut px = [0u16; 3];
            let mut inside = true;
            for (c, slot) in px.iter_mut().enumerate() {
                match bilinear(rgb.width, rgb.height, su, sv, |x, y| T::lit(rgb.get(x, y)[c] as f64)) {
                    Some(val) => *slot = val.round().to_u16().unwrap_or(0),
                    None => inside = false,
                }
            }
            if inside {
                out.data[v * w + u] = px;
                mask.set(u, v, true);
            }
        }
    }
    (out, mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::BitDepth;
    use crate::linalg::{Mat3, Vec3};

    fn textured(w: usize, h: usize) -> ImageRgb {
        let mut img = ImageRgb::new(w, h, BitDepth::Eight);
        for y in 0..h {
            for x in 0..w {
                img.data[y * w + x] = [(x * 5 % 256) as u16, (y * 7 % 256) as u16, ((x + y) % 256) as u16];
            }
        }
        img
    }

    #[test]
    fn coincident_camera_is_identity() {
        let rig = RectifiedRig::<f64>::ideal(80.0, 50.0, 40, 30);
        let rgb = textured(40, 30);
        let depth = Plane::filled(40, 30, 120.0);
        let valid = BinaryMask::full(40, 30);
        let pose = StereoExtrinsics { rotation: Mat3::identity(), translation: Vec3::zero() };
        let (out, mask) = align_rgb_to_left(&rgb, &depth, &valid, &rig.left, &pose, &rig);
        assert_eq!(mask.count(), 40 * 30);
        assert_eq!(out, rgb);
    }

    #[test]
    fn no_valid_depth_gives_holes_only() {
        let rig = RectifiedRig::<f64>::ideal(80.0, 50.0, 40, 30);
        let depth = Plane::filled(40, 30, 120.0);
        let pose = StereoExtrinsics { rotation: Mat3::identity(), translation: Vec3::new(5.0, 0.0, 0.0) };
        let (_, mask) = align_rgb_to_left(&textured(40, 30), &depth, &BinaryMask::new(40, 30), &rig.left, &pose, &rig);
        assert!(mask.is_empty());
    }

    #[test]
    fn offset_camera_on_plane_matches_ground_truth() {
        // plane at z = 150 mm seen by an RGB camera shifted and slightly
        // rotated; the RGB frame encodes world (X, Y) so alignment error can
        // be read back in millimetres
        let (w, h) = (120, 90);
        let z = 150.0;
        let rig = RectifiedRig::<f64>::ideal(100.0, 40.0, w, h);
        let rgb_intr = CameraIntrinsics::new(110.0, 110.0, 62.0, 44.0, [0.0; 5], (w, h));
        let pose = StereoExtrinsics {
            rotation: Mat3::rotation(Vec3::new(0.0, 1.0, 0.0), 0.02),
            translation: Vec3::new(-20.0, -4.0, 0.0),
        };
        let pose_inv = pose.rotation.transpose();
        let center = -(pose_inv.mul_vec(&pose.translation));
        let mut rgb = ImageRgb::new(w, h, BitDepth::Sixteen);
        for v in 0..h {
            for u in 0..w {
                let dir = pose_inv.mul_vec(&rgb_intr.pixel_to_ray(u as f64, v as f64));
                let p = center + dir * ((z - center.z()) / dir.z());
                rgb.data[v * w + u] = [(p.x() * 100.0 + 30000.0) as u16, (p.y() * 100.0 + 30000.0) as u16, 0];
            }
        }
        let depth = Plane::filled(w, h, z);
        let (out, mask) = align_rgb_to_left(&rgb, &depth, &BinaryMask::full(w, h), &rgb_intr, &pose, &rig);
        assert!(mask.count() > w * h / 2);
        let mut worst_px: f64 = 0.0;
        for v in 0..h {
            for u in 0..w {
                if mask.get(u, v) {
                    let [xr, yr, _] = out.get(u, v);
                    let gx = (u as f64 - rig.cx()) / rig.focal * z;
                    let gy = (v as f64 - rig.cy()) / rig.focal * z;
                    let err_mm = ((xr as f64 - 30000.0) / 100.0 - gx).hypot((yr as f64 - 30000.0) / 100.0 - gy);
                    worst_px = worst_px.max(err_mm * rig.focal / z);
                }
            }
        }
        assert!(worst_px < 1.0, "alignment error {worst_px} px");
    }
}
