//! Maximum-curvature vein features.
//!
//! Every floating point reduction here is arranged so that rotating the input
//! by 90° permutes operands of commutative operations only: kernel taps are
//! summed as symmetric pairs, the mixed derivative averages both filter
//! orders, and direction scores are combined pairwise. The feature map is
//! therefore exactly rotation-equivariant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, ImageGray};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum McDirections {
    /// Horizontal, vertical and both diagonals.
    All,
    /// Horizontal profiles only, across an upright finger.
    Transverse,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McParams {
    /// Gaussian scale of the derivative filters, pixels.
    pub sigma: f64,
    pub directions: McDirections,
}

impl Default for McParams {
    fn default() -> Self {
        McParams { sigma: 2.5, directions: McDirections::All }
    }
}

/// Curvatures at or below this are treated as flat (intensities in [0, 1]).
const KAPPA_EPS: f64 = 1e-7;

struct Kernels {
    r: usize,
    smooth: Vec<f64>,
    first: Vec<f64>,
    second: Vec<f64>,
}

/// Taps `k[0..=r]` of even (`smooth`, `second`) and odd (`first`) kernels,
/// exact on constants, linear and quadratic signals respectively.
fn kernels(sigma: f64) -> Kernels {
    let r = (3.0 * sigma).ceil().max(1.0) as usize;
    let g: Vec<f64> = (0..=r).map(|j| (-((j * j) as f64) / (2.0 * sigma * sigma)).exp()).collect();
    let total = g[0] + 2.0 * g[1..].iter().sum::<f64>();
    let smooth: Vec<f64> = g.iter().map(|v| v / total).collect();
    let m1: f64 = 2.0 * (1..=r).map(|j| (j * j) as f64 * g[j]).sum::<f64>();
    let first: Vec<f64> = (0..=r).map(|j| j as f64 * g[j] / m1).collect();
    let c = m1 / total;
    let raw: Vec<f64> = (0..=r).map(|j| ((j * j) as f64 - c) * g[j]).collect();
    let m2: f64 = 2.0 * (1..=r).map(|j| (j * j) as f64 * raw[j]).sum::<f64>();
    let second: Vec<f64> = raw.iter().map(|v| 2.0 * v / m2).collect();
    Kernels { r, smooth, first, second }
}

#[derive(Clone, Copy)]
enum Parity {
    Even,
    Odd,
}

struct Grid {
    w: usize,
    h: usize,
    v: Vec<f64>,
}

impl Grid {
    fn conv(&self, k: &[f64], parity: Parity, along_x: bool) -> Grid {
        let (w, h) = (self.w, self.h);
        let r = k.len() - 1;
        let mut out = vec![0.0; w * h];
        let (n, lines) = if along_x { (w, h) } else { (h, w) };
        // line with `r` edge-replicated samples on both sides
        let mut buf = vec![0.0; n + 2 * r];
        let mut res = vec![0.0; n];
        for line in 0..lines {
            let at = |i: usize| if along_x { line * w + i } else { i * w + line };
            for (j, b) in buf.iter_mut().enumerate() {
                *b = self.v[at((j as isize - r as isize).clamp(0, n as isize - 1) as usize)];
            }
            for (i, o) in res.iter_mut().enumerate() {
                let c = i + r;
                let mut acc = match parity {
                    Parity::Even => k[0] * buf[c],
                    Parity::Odd => 0.0,
                };
                for (j, &kj) in k.iter().enumerate().skip(1) {
                    let (p, m) = (buf[c + j], buf[c - j]);
                    acc += match parity {
                        Parity::Even => kj * (p + m),
                        Parity::Odd => kj * (p - m),
                    };
                }
                *o = acc;
            }
            for (i, &v) in res.iter().enumerate() {
                out[at(i)] = v;
            }
        }
        Grid { w, h, v: out }
    }
}

/// Fills background pixels ring by ring with the mean of already-filled
/// 4-neighbours (summed in sorted order), so derivatives inside the mask do
/// not see the finger's silhouette edge.
fn fill_background(vals: &mut [f64], inside: &[bool], w: usize, h: usize, rings: usize) {
    let mut filled = inside.to_vec();
    for _ in 0..rings {
        let mut updates = Vec::new();
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                if filled[i] {
                    continue;
                }
                let mut nb = [0.0f64; 4];
                let mut k = 0;
                for (dx, dy) in [(-1isize, 0isize), (1, 0), (0, -1), (0, 1)] {
                    let (xx, yy) = (x as isize + dx, y as isize + dy);
                    if xx >= 0 && yy >= 0 && (xx as usize) < w && (yy as usize) < h && filled[yy as usize * w + xx as usize] {
                        nb[k] = vals[yy as usize * w + xx as usize];
                        k += 1;
                    }
                }
                if k > 0 {
                    let s = &mut nb[..k];
                    s.sort_by(f64::total_cmp);
                    updates.push((i, s.iter().sum::<f64>() / k as f64));
                }
            }
        }
        if updates.is_empty() {
            break;
        }
        for (i, v) in updates {
            vals[i] = v;
            filled[i] = true;
        }
    }
}

/// Adds `κ_max · width` at every maximum of each concave run along the line
/// starting at `(x, y)` with step `(dx, dy)`.
fn score_line(kappa: &[f64], inside: &[bool], w: usize, h: usize, start: (isize, isize), step: (isize, isize), out: &mut [f64]) {
    let (mut x, mut y) = start;
    let mut run: Vec<usize> = Vec::new();
    let flush = |run: &mut Vec<usize>, out: &mut [f64]| {
        if run.is_empty() {
            return;
        }
        let kmax = run.iter().map(|&i| kappa[i]).fold(f64::MIN, f64::max);
        let score = kmax * run.len() as f64;
        for &i in run.iter() {
            if kappa[i] == kmax {
                out[i] += score;
            }
        }
        run.clear();
    };
    while x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h {
        let i = y as usize * w + x as usize;
        if inside[i] && kappa[i] > KAPPA_EPS {
            run.push(i);
        } else {
            flush(&mut run, out);
        }
        x += step.0;
        y += step.1;
    }
    flush(&mut run, out);
}

fn line_starts(w: usize, h: usize, step: (isize, isize)) -> Vec<(isize, isize)> {
    let (w, h) = (w as isize, h as isize);
    match step {
        (1, 0) => (0..h).map(|y| (0, y)).collect(),
        (0, 1) => (0..w).map(|x| (x, 0)).collect(),
        (1, 1) => (0..w).map(|x| (x, 0)).chain((1..h).map(|y| (0, y))).collect(),
        (1, -1) => (0..w).map(|x| (x, h - 1)).chain((0..h - 1).map(|y| (0, y))).collect(),
        _ => unreachable!("unsupported profile direction"),
    }
}

/// Binary vein map restricted to `finger_mask`.
pub fn extract_mc(img: &ImageGray, finger_mask: &BinaryMask, params: &McParams) -> Result<BinaryMask> {
    if finger_mask.width() != img.width() || finger_mask.height() != img.height() {
        return Err(Error::DimensionMismatch("mask and image differ in size".into()));
    }
    let Some((bx0, by0, bx1, by1)) = finger_mask.bbox() else { return Err(Error::EmptyMask) };
    if !(params.sigma > 0.0) {
        return Err(Error::InvalidParam("mc.sigma must be positive".into()));
    }
    let k = kernels(params.sigma);
    let margin = 2 * k.r + 3;
    let x0 = bx0.saturating_sub(margin);
    let y0 = by0.saturating_sub(margin);
    let x1 = (bx1 + margin).min(img.width());
    let y1 = (by1 + margin).min(img.height());
    let (w, h) = (x1 - x0, y1 - y0);
    let full = img.full_scale() as f64;

    let inside: Vec<bool> = (0..w * h).map(|i| finger_mask.get(x0 + i % w, y0 + i / w)).collect();
    let mut vals: Vec<f64> = (0..w * h).map(|i| img.get(x0 + i % w, y0 + i / w) as f64 / full).collect();
    fill_background(&mut vals, &inside, w, h, 2 * k.r + 2);
    let f = Grid { w, h, v: vals };

    let sy = f.conv(&k.smooth, Parity::Even, false);
    let sx = f.conv(&k.smooth, Parity::Even, true);
    let fx = sy.conv(&k.first, Parity::Odd, true);
    let fy = sx.conv(&k.first, Parity::Odd, false);
    let fxx = sy.conv(&k.second, Parity::Even, true);
    let fyy = sx.conv(&k.second, Parity::Even, false);

    let curvature = |fu: f64, fuu: f64| {
        let q = 1.0 + fu * fu;
        fuu / (q * q.sqrt())
    };
    let mut v_h = vec![0.0; w * h];
    let kh: Vec<f64> = (0..w * h).map(|i| curvature(fx.v[i], fxx.v[i])).collect();
    for s in line_starts(w, h, (1, 0)) {
        score_line(&kh, &inside, w, h, s, (1, 0), &mut v_h);
    }

    let mut v = v_h.clone();
    let all = params.directions == McDirections::All;
    if all {
        let fxy = {
            let a = f.conv(&k.first, Parity::Odd, false).conv(&k.first, Parity::Odd, true);
            let b = f.conv(&k.first, Parity::Odd, true).conv(&k.first, Parity::Odd, false);
            Grid { w, h, v: a.v.iter().zip(&b.v).map(|(p, q)| (p + q) * 0.5).collect() }
        };
        let kv: Vec<f64> = (0..w * h).map(|i| curvature(fy.v[i], fyy.v[i])).collect();
        let r2 = std::f64::consts::FRAC_1_SQRT_2;
        let mean2: Vec<f64> = (0..w * h).map(|i| (fxx.v[i] + fyy.v[i]) * 0.5).collect();
        let kd1: Vec<f64> = (0..w * h).map(|i| curvature((fx.v[i] + fy.v[i]) * r2, mean2[i] + fxy.v[i])).collect();
        let kd2: Vec<f64> = (0..w * h).map(|i| curvature((fx.v[i] - fy.v[i]) * r2, mean2[i] - fxy.v[i])).collect();
        let mut v_v = vec![0.0; w * h];
        let mut v_d1 = vec![0.0; w * h];
        let mut v_d2 = vec![0.0; w * h];
        for s in line_starts(w, h, (0, 1)) {
            score_line(&kv, &inside, w, h, s, (0, 1), &mut v_v);
        }
        for s in line_starts(w, h, (1, 1)) {
            score_line(&kd1, &inside, w, h, s, (1, 1), &mut v_d1);
        }
        for s in line_starts(w, h, (1, -1)) {
            score_line(&kd2, &inside, w, h, s, (1, -1), &mut v_d2);
        }
        for i in 0..w * h {
            v[i] = (v_h[i] + v_v[i]) + (v_d1[i] + v_d2[i]);
        }
    }

    // connectivity: reinforce points continued on both sides
    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            v[y as usize * w + x as usize]
        }
    };
    let dirs: &[(isize, isize)] = if all { &[(1, 0), (0, 1), (1, 1), (1, -1)] } else { &[(1, 0), (0, 1)] };
    let mut g = vec![0.0f64; w * h];
    for y in 0..h as isize {
        for x in 0..w as isize {
            let i = y as usize * w + x as usize;
            if !inside[i] {
                continue;
            }
            let mut best = f64::MIN;
            for &(dx, dy) in dirs {
                let fwd = at(x + dx, y + dy).max(at(x + 2 * dx, y + 2 * dy));
                let bwd = at(x - dx, y - dy).max(at(x - 2 * dx, y - 2 * dy));
                best = best.max(v[i] + fwd.min(bwd));
            }
            g[i] = best;
        }
    }

    let mut scores: Vec<f64> = (0..w * h).filter(|&i| inside[i]).map(|i| g[i]).collect();
    scores.sort_by(f64::total_cmp);
    let n = scores.len();
    let median = if n % 2 == 1 { scores[n / 2] } else { (scores[n / 2 - 1] + scores[n / 2]) * 0.5 };

    let mut out = BinaryMask::new(img.width(), img.height());
    for i in 0..w * h {
        if inside[i] && g[i] > median && g[i] > 0.0 {
            out.set(x0 + i % w, y0 + i / w, true);
        }
    }
    Ok(out)
}
