use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::imgcore::{BinaryMask, BitDepth, ImageGray, Plane};
use crate::linalg::Vec3;
use crate::photostereo::LightSet;

use super::{derive_seed, rng_for};

/// Orthographically viewed Lambertian surface in image axes (x right,
/// y down, z toward the camera).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum PsScene {
    /// Hemisphere of `radius` pixels centred on `(cx, cy)`.
    Sphere { cx: f64, cy: f64, radius: f64 },
    /// Plane filling the image with unit normal along `normal`.
    Plane { normal: [f64; 3] },
}

/// Near-light falloff: each light sits at `distance_mm · l / l_z` above the
/// image centre and irradiance scales as `(distance / range)⁴`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Falloff {
    pub distance_mm: f64,
    pub pixel_mm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PsRenderParams {
    pub width: usize,
    pub height: usize,
    /// Intensity of unit albedo facing the light, as a fraction of full scale.
    pub scale: f64,
    pub albedo: f64,
    /// Relative amplitude of smooth albedo texture; zero for uniform.
    pub albedo_variation: f64,
    pub falloff: Option<Falloff>,
    pub noise_sigma: f64,
    pub bit_depth: BitDepth,
}

impl Default for PsRenderParams {
    fn default() -> Self {
        PsRenderParams {
            width: 96,
            height: 96,
            scale: 0.8,
            albedo: 1.0,
            albedo_variation: 0.0,
            falloff: None,
            noise_sigma: 0.0,
            bit_depth: BitDepth::Sixteen,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PsTruth {
    /// Zero vector off the surface.
    pub normals: Vec<Vec3<f64>>,
    pub albedo: Vec<f64>,
    /// Height toward the camera in pixels; NaN off the surface.
    pub height: Plane<f64>,
    pub surface: BinaryMask,
    /// Surface pixels facing every light.
    pub lit_by_all: BinaryMask,
}

impl PsScene {
    fn at(&self, x: f64, y: f64) -> Option<(Vec3<f64>, f64)> {
        match *self {
            PsScene::Sphere { cx, cy, radius } => {
                let (u, v) = (x - cx, y - cy);
                let h2 = radius * radius - u * u - v * v;
                (h2 > 0.0).then(|| {
                    let h = h2.sqrt();
                    (Vec3::new(u / radius, v / radius, h / radius), h)
                })
            }
            PsScene::Plane { normal } => {
                let n = Vec3::new(normal[0], normal[1], normal[2]).normalized()?;
                Some((n, -(n.x() * x + n.y() * y) / n.z()))
            }
        }
    }
}

/// One frame per light of `lights`, in light order.
pub fn render_ps(scene: &PsScene, lights: &LightSet<f64>, params: &PsRenderParams, noise_seed: u64) -> (Vec<ImageGray>, PsTruth) {
    let p = params;
    let (w, h) = (p.width, p.height);
    let full = p.bit_depth.max_value() as f64;
    let (icx, icy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut normals = vec![Vec3::zero(); w * h];
    let mut albedo = vec![0.0; w * h];
    let mut height = Plane::filled(w, h, f64::NAN);
    let mut surface = BinaryMask::new(w, h);
    let mut lit_by_all = BinaryMask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let Some((n, z)) = scene.at(x as f64, y as f64) else { continue };
            let i = y * w + x;
            normals[i] = n;
            height.set(x, y, z);
            surface.set(x, y, true);
            let tex = if p.albedo_variation > 0.0 {
                let (fx, fy) = (x as f64 / w as f64 * std::f64::consts::TAU, y as f64 / h as f64 * std::f64::consts::TAU);
                1.0 + p.albedo_variation * (0.6 * (2.0 * fx).sin() * (3.0 * fy).cos() + 0.4 * (5.0 * fx + fy).sin())
            } else {
                1.0
            };
            albedo[i] = p.albedo * tex;
            lit_by_all.set(x, y, lights.directions().iter().all(|l| n.dot(l) > 0.0));
        }
    }

    let frames = lights
        .directions()
        .iter()
        .enumerate()
        .map(|(k, l)| {
            let mut rng = rng_for(&[derive_seed(&[noise_seed, k as u64])]);
            let noise = (p.noise_sigma > 0.0).then(|| Normal::new(0.0, p.noise_sigma).expect("valid sigma"));
            let pos = p.falloff.map(|f| l.scale(f.distance_mm / l.z()));
            ImageGray::from_fn(w, h, p.bit_depth, |x, y| {
                let i = y * w + x;
                let mut v = if surface.get(x, y) { albedo[i] * normals[i].dot(l).max(0.0) * p.scale * full } else { 0.0 };
                if let (Some(f), Some(pos)) = (p.falloff, pos) {
                    let s = Vec3::new((x as f64 - icx) * f.pixel_mm, (y as f64 - icy) * f.pixel_mm, 0.0);
                    let r = (pos - s).norm();
                    v *= (f.distance_mm / r).powi(4);
                }
                if let Some(n) = &noise {
                    v += n.sample(&mut rng);
                }
                v.round().clamp(0.0, full) as u16
            })
        })
        .collect();
    (frames, PsTruth { normals, albedo, height, surface, lit_by_all })
}
