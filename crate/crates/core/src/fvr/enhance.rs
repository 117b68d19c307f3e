//! Pluggable vein enhancement.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::imgcore::ImageGray;

/// Size-preserving, deterministic image transform.
pub trait Enhancer: Send + Sync {
    fn name(&self) -> &str;
    fn apply(&self, img: &ImageGray) -> ImageGray;
}

pub struct Identity;

impl Enhancer for Identity {
    fn name(&self) -> &str {
        "identity"
    }

    fn apply(&self, img: &ImageGray) -> ImageGray {
        img.clone()
    }
}

/// Contrast-limited adaptive histogram equalization followed by removal of
/// the strongest even-symmetric Gabor valley response.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClaheGabor {
    pub tile: usize,
    pub clip_limit: f64,
    pub sigma: f64,
    pub wavelength: f64,
    pub orientations: usize,
}

impl Default for ClaheGabor {
    fn default() -> Self {
        ClaheGabor { tile: 32, clip_limit: 2.0, sigma: 3.0, wavelength: 10.0, orientations: 8 }
    }
}

impl Enhancer for ClaheGabor {
    fn name(&self) -> &str {
        "clahe-gabor"
    }

    fn apply(&self, img: &ImageGray) -> ImageGray {
        let eq = clahe(img, self.tile, self.clip_limit);
        let (w, h) = (img.width(), img.height());
        let src: Vec<f64> = eq.data().iter().map(|&v| v as f64).collect();
        let kernels: Vec<(Vec<f64>, isize)> =
            (0..self.orientations).map(|k| gabor_even(self.sigma, self.wavelength, PI * k as f64 / self.orientations as f64)).collect();
        let full = img.full_scale() as f64;
        let mut out = eq.clone();
        for y in 0..h {
            for x in 0..w {
                let mut valley = 0.0f64;
                for (kern, r) in &kernels {
                    let side = (2 * r + 1) as usize;
                    let mut acc = 0.0;
                    for ky in -r..=*r {
                        let yy = (y as isize + ky).clamp(0, h as isize - 1) as usize;
                        for kx in -r..=*r {
                            let xx = (x as isize + kx).clamp(0, w as isize - 1) as usize;
                            acc += kern[(ky + r) as usize * side + (kx + r) as usize] * src[yy * w + xx];
                        }
                    }
                    valley = valley.max(-acc);
                }
                out.set(x, y, (src[y * w + x] - valley).clamp(0.0, full).round() as u16);
            }
        }
        out
    }
}

/// Zero-mean even Gabor kernel, scaled so its positive lobe sums to one.
fn gabor_even(sigma: f64, wavelength: f64, theta: f64) -> (Vec<f64>, isize) {
    let r = (2.5 * sigma).ceil() as isize;
    let (s, c) = theta.sin_cos();
    let mut k = Vec::new();
    for y in -r..=r {
        for x in -r..=r {
            let xp = x as f64 * c + y as f64 * s;
            let yp = -(x as f64) * s + y as f64 * c;
            k.push((-(xp * xp + yp * yp) / (2.0 * sigma * sigma)).exp() * (2.0 * PI * xp / wavelength).cos());
        }
    }
    let mean = k.iter().sum::<f64>() / k.len() as f64;
    k.iter_mut().for_each(|v| *v -= mean);
    let pos: f64 = k.iter().filter(|v| **v > 0.0).sum();
    k.iter_mut().for_each(|v| *v /= pos);
    (k, r)
}

/// CLAHE with bilinear interpolation between tile mappings.
pub fn clahe(img: &ImageGray, tile: usize, clip_limit: f64) -> ImageGray {
    let (w, h) = (img.width(), img.height());
    let levels = img.bit_depth().levels();
    let full = img.full_scale() as f64;
    let tile = tile.max(2);
    let (gx, gy) = (w.div_ceil(tile), h.div_ceil(tile));
    let mut luts = vec![vec![0.0f64; levels]; gx * gy];
    for ty in 0..gy {
        for tx in 0..gx {
            let (x0, y0) = (tx * tile, ty * tile);
            let (x1, y1) = ((x0 + tile).min(w), (y0 + tile).min(h));
            let mut hist = vec![0.0f64; levels];
            for y in y0..y1 {
                for x in x0..x1 {
                    hist[img.get(x, y) as usize] += 1.0;
                }
            }
            let n = ((x1 - x0) * (y1 - y0)) as f64;
            let clip = (clip_limit * n / levels as f64).max(1.0);
            let mut excess = 0.0;
            for b in hist.iter_mut() {
                if *b > clip {
                    excess += *b - clip;
                    *b = clip;
                }
            }
            let bonus = excess / levels as f64;
            let lut = &mut luts[ty * gx + tx];
            let mut acc = 0.0;
            for (i, b) in hist.iter().enumerate() {
                acc += b + bonus;
                lut[i] = acc / n * full;
            }
        }
    }
    let centre = |t: usize, n: usize| (t * tile) as f64 + (((t + 1) * tile).min(n) - t * tile) as f64 / 2.0 - 0.5;
    let locate = |p: usize, g: usize, n: usize| -> (usize, usize, f64) {
        let pf = p as f64;
        if pf <= centre(0, n) {
            return (0, 0, 0.0);
        }
        if pf >= centre(g - 1, n) {
            return (g - 1, g - 1, 0.0);
        }
        let mut t = 0;
        while centre(t + 1, n) < pf {
            t += 1;
        }
        let (a, b) = (centre(t, n), centre(t + 1, n));
        (t, t + 1, (pf - a) / (b - a))
    };
    let mut out = ImageGray::new(w, h, img.bit_depth());
    for y in 0..h {
        let (ya, yb, fy) = locate(y, gy, h);
        for x in 0..w {
            let (xa, xb, fx) = locate(x, gx, w);
            let v = img.get(x, y) as usize;
            let top = luts[ya * gx + xa][v] * (1.0 - fx) + luts[ya * gx + xb][v] * fx;
            let bot = luts[yb * gx + xa][v] * (1.0 - fx) + luts[yb * gx + xb][v] * fx;
            out.set(x, y, (top * (1.0 - fy) + bot * fy).round().clamp(0.0, full) as u16);
        }
    }
    out
}

pub fn enhancer_by_name(name: &str) -> Result<Box<dyn Enhancer>> {
    match name {
        "identity" => Ok(Box::new(Identity)),
        "clahe-gabor" => Ok(Box::new(ClaheGabor::default())),
        other => Err(Error::UnknownEnhancer(other.to_string())),
    }
}

pub fn enhance(img: &ImageGray, enhancer: &dyn Enhancer) -> ImageGray {
    enhancer.apply(img)
}
