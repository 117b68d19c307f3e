use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::RectifiedRig;
use crate::imgcore::{BinaryMask, BitDepth, ImageGray, Plane};

use super::{derive_seed, rng_for};

/// Textured plane `Z = z0 + a·X + b·Y` in left-camera millimetres,
/// optionally bounded in `X` and `Y`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenePlane {
    pub z0: f64,
    pub a: f64,
    pub b: f64,
    pub x_range: Option<(f64, f64)>,
    pub y_range: Option<(f64, f64)>,
}

impl ScenePlane {
    pub fn fronto(z: f64) -> Self {
        ScenePlane { z0: z, a: 0.0, b: 0.0, x_range: None, y_range: None }
    }

    pub fn with_extent(mut self, x: (f64, f64), y: (f64, f64)) -> Self {
        self.x_range = Some(x);
        self.y_range = Some(y);
        self
    }

    /// Ray parameter of the hit from centre `(cx, 0, 0)` along
    /// `(rx, ry, 1)`; the ray parameter equals the hit depth.
    fn hit(&self, cx: f64, rx: f64, ry: f64) -> Option<(f64, f64, f64)> {
        let den = 1.0 - self.a * rx - self.b * ry;
        if den.abs() < 1e-12 {
            return None;
        }
        let t = (self.z0 + self.a * cx) / den;
        if t <= 0.0 {
            return None;
        }
        let (x, y) = (cx + t * rx, t * ry);
        let inside = |r: Option<(f64, f64)>, v: f64| r.map_or(true, |(lo, hi)| v >= lo && v <= hi);
        (inside(self.x_range, x) && inside(self.y_range, y)).then_some((t, x, y))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Texture {
    /// Bilinear value noise.
    #[default]
    Smooth,
    /// Independent uniform value per cell.
    Dots,
}

/// Planes textured on a lattice of spacing `cell_mm` in `(X, Y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereoScene {
    pub planes: Vec<ScenePlane>,
    pub cell_mm: f64,
    pub texture_seed: u64,
    #[serde(default)]
    pub texture: Texture,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StereoRenderParams {
    pub width: usize,
    pub height: usize,
    pub focal: f64,
    /// Millimetres.
    pub baseline: f64,
    /// Samples per pixel along each axis.
    pub supersample: usize,
    pub noise_sigma: f64,
    pub bit_depth: BitDepth,
}

impl Default for StereoRenderParams {
    fn default() -> Self {
        StereoRenderParams { width: 192, height: 128, focal: 600.0, baseline: 40.0, supersample: 3, noise_sigma: 0.0, bit_depth: BitDepth::Eight }
    }
}

/// Ground truth in the left view.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoTruth {
    /// NaN where no surface is hit.
    pub depth: Plane<f64>,
    /// `f·B/Z`; NaN where no surface is hit.
    pub disparity: Plane<f64>,
    /// A surface is hit.
    pub visible: BinaryMask,
    /// Visible here but hidden behind a nearer surface in the right view.
    pub occluded: BinaryMask,
    /// Visible here but projecting outside the right image.
    pub out_of_view: BinaryMask,
}

impl StereoTruth {
    /// Visible in both views.
    pub fn matchable(&self) -> BinaryMask {
        BinaryMask::from_fn(self.visible.width(), self.visible.height(), |x, y| {
            self.visible.get(x, y) && !self.occluded.get(x, y) && !self.out_of_view.get(x, y)
        })
    }
}

#[derive(Debug, Clone)]
pub struct StereoRender {
    pub left: ImageGray,
    pub right: ImageGray,
    pub rig: RectifiedRig<f64>,
    pub truth: StereoTruth,
}

fn lattice(seed: u64, plane: usize, ix: i64, iy: i64) -> f64 {
    let h = derive_seed(&[seed, plane as u64, ix as u64, iy as u64]);
    (h >> 11) as f64 / (1u64 << 53) as f64
}

/// Texture value in `[0, 1]`.
fn texture_at(texture: Texture, seed: u64, plane: usize, x: f64, y: f64, cell: f64) -> f64 {
    let (gx, gy) = (x / cell, y / cell);
    if texture == Texture::Dots {
        return lattice(seed, plane, gx.floor() as i64, gy.floor() as i64);
    }
    let (x0, y0) = (gx.floor(), gy.floor());
    let (fx, fy) = (gx - x0, gy - y0);
    let (ix, iy) = (x0 as i64, y0 as i64);
    let v00 = lattice(seed, plane, ix, iy);
    let v10 = lattice(seed, plane, ix + 1, iy);
    let v01 = lattice(seed, plane, ix, iy + 1);
    let v11 = lattice(seed, plane, ix + 1, iy + 1);
    (v00 * (1.0 - fx) + v10 * fx) * (1.0 - fy) + (v01 * (1.0 - fx) + v11 * fx) * fy
}

fn nearest_hit(scene: &StereoScene, cx: f64, rx: f64, ry: f64) -> Option<(usize, f64, f64, f64)> {
    scene
        .planes
        .iter()
        .enumerate()
        .filter_map(|(k, p)| p.hit(cx, rx, ry).map(|(t, x, y)| (k, t, x, y)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
}

fn render_view(scene: &StereoScene, p: &StereoRenderParams, cam_x: f64, noise_seed: u64) -> ImageGray {
    let (cx, cy) = ((p.width as f64 - 1.0) / 2.0, (p.height as f64 - 1.0) / 2.0);
    let s = p.supersample.max(1);
    let full = p.bit_depth.max_value() as f64;
    let mut rng = rng_for(&[noise_seed]);
    let noise = (p.noise_sigma > 0.0).then(|| Normal::new(0.0, p.noise_sigma).expect("valid sigma"));
    let mut img = ImageGray::new(p.width, p.height, p.bit_depth);
    for y in 0..p.height {
        for x in 0..p.width {
            let mut acc = 0.0;
            for j in 0..s {
                for i in 0..s {
                    let u = x as f64 - 0.5 + (i as f64 + 0.5) / s as f64;
                    let v = y as f64 - 0.5 + (j as f64 + 0.5) / s as f64;
                    let (rx, ry) = ((u - cx) / p.focal, (v - cy) / p.focal);
                    acc += match nearest_hit(scene, cam_x, rx, ry) {
                        Some((k, _, hx, hy)) => 0.1 + 0.8 * texture_at(scene.texture, scene.texture_seed, k, hx, hy, scene.cell_mm),
                        None => 0.05,
                    };
                }
            }
            let mut val = acc / (s * s) as f64 * full;
            if let Some(n) = &noise {
                val += n.sample(&mut rng);
            }
            img.set(x, y, val.round().clamp(0.0, full) as u16);
        }
    }
    img
}

/// Rectified pair of `scene` seen by an ideal rig, with the right camera
/// displaced by `+baseline` along `X`. Matching points satisfy
/// `x_right = x_left - f·B/Z`.
pub fn render_stereo(scene: &StereoScene, params: &StereoRenderParams, noise_seed: u64) -> StereoRender {
    let p = params;
    let rig = RectifiedRig::ideal(p.focal, p.baseline, p.width, p.height);
    let left = render_view(scene, p, 0.0, derive_seed(&[noise_seed, 0]));
    let right = render_view(scene, p, p.baseline, derive_seed(&[noise_seed, 1]));

    let (w, h) = (p.width, p.height);
    let (cx, cy) = ((w as f64 - 1.0) / 2.0, (h as f64 - 1.0) / 2.0);
    let mut depth = Plane::filled(w, h, f64::NAN);
    let mut disparity = Plane::filled(w, h, f64::NAN);
    let mut visible = BinaryMask::new(w, h);
    let mut occluded = BinaryMask::new(w, h);
    let mut out_of_view = BinaryMask::new(w, h);
    for y in 0..h {
        for x in 0..w {
            let (rx, ry) = ((x as f64 - cx) / p.focal, (y as f64 - cy) / p.focal);
            let Some((_, z, hx, _)) = nearest_hit(scene, 0.0, rx, ry) else { continue };
            visible.set(x, y, true);
            depth.set(x, y, z);
            let d = p.focal * p.baseline / z;
            disparity.set(x, y, d);
            let xr = x as f64 - d;
            if xr < -0.5 || xr > w as f64 - 0.5 {
                out_of_view.set(x, y, true);
                continue;
            }
            let rrx = (hx - p.baseline) / z;
            if let Some((_, zr, _, _)) = nearest_hit(scene, p.baseline, rrx, ry) {
                if zr < z * (1.0 - 1e-9) {
                    occluded.set(x, y, true);
                }
            }
        }
    }
    StereoRender { left, right, rig, truth: StereoTruth { depth, disparity, visible, occluded, out_of_view } }
}
