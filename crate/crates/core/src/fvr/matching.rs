use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::imgcore::BinaryMask;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MatchParams {
    /// Maximum horizontal and vertical shift, pixels.
    pub cw: usize,
    pub ch: usize,
}

impl Default for MatchParams {
    fn default() -> Self {
        MatchParams { cw: 30, ch: 30 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchResult {
    pub score: f64,
    /// `(s, t)` such that `A(p)` is compared with `B(p + (s, t))`.
    pub shift: (isize, isize),
    /// Largest overlap count `Σ A(p)·B(p + shift)`.
    pub overlap: u64,
    /// Both maps were empty; the score is defined as 0.
    pub both_empty: bool,
}

/// Overlap counts `Σ_p A(p)·B(p + (s, t))` for all `|s| ≤ cw, |t| ≤ ch`,
/// row-major over `t` then `s`, computed by frequency-domain correlation.
pub fn overlap_counts(a: &BinaryMask, b: &BinaryMask, cw: usize, ch: usize) -> Vec<u64> {
    let (nw, nh) = (2 * cw + 1, 2 * ch + 1);
    let mut out = vec![0u64; nw * nh];
    let (Some(ba), Some(bb)) = (a.bbox(), b.bbox()) else { return out };
    let (aw, ah) = (ba.2 - ba.0, ba.3 - ba.1);
    let (bw, bh) = (bb.2 - bb.0, bb.3 - bb.1);
    // shift s between full maps is lag s + off between the cropped maps
    let (offx, offy) = (ba.0 as isize - bb.0 as isize, ba.1 as isize - bb.1 as isize);
    // lags with possibly nonzero overlap inside the window
    let lx = ((offx - cw as isize).max(1 - aw as isize), (offx + cw as isize).min(bw as isize - 1));
    let ly = ((offy - ch as isize).max(1 - ah as isize), (offy + ch as isize).min(bh as isize - 1));
    if lx.0 > lx.1 || ly.0 > ly.1 {
        return out;
    }
    // circular period holding both crops and keeping every wanted lag free
    // of aliases
    let fw = smooth_size(((bw as isize - lx.0).max(lx.1 + aw as isize) as usize).max(aw).max(bw));
    let fh = smooth_size(((bh as isize - ly.0).max(ly.1 + ah as isize) as usize).max(ah).max(bh));

    // A in the real part, B in the imaginary part: one forward transform
    let mut z = vec![Complex::new(0.0, 0.0); fw * fh];
    for y in 0..ah {
        for x in 0..aw {
            if a.get(ba.0 + x, ba.1 + y) {
                z[y * fw + x].re = 1.0;
            }
        }
    }
    for y in 0..bh {
        for x in 0..bw {
            if b.get(bb.0 + x, bb.1 + y) {
                z[y * fw + x].im = 1.0;
            }
        }
    }
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        fft2(&mut z, fw, fh, &p.plan_fft_forward(fw), &p.plan_fft_forward(fh));
        // FA = (Z[k] + conj Z[-k]) / 2, FB = (Z[k] - conj Z[-k]) / 2i; keep conj(FA)·FB
        let mut prod = vec![Complex::new(0.0, 0.0); fw * fh];
        for ky in 0..fh {
            let my = (fh - ky) % fh;
            for kx in 0..fw {
                let mx = (fw - kx) % fw;
                let zk = z[ky * fw + kx];
                let zm = z[my * fw + mx].conj();
                let fa = (zk + zm) * 0.5;
                let fb = (zk - zm) * Complex::new(0.0, -0.5);
                prod[ky * fw + kx] = fa.conj() * fb;
            }
        }
        fft2(&mut prod, fw, fh, &p.plan_fft_inverse(fw), &p.plan_fft_inverse(fh));
        let norm = (fw * fh) as f64;
        for t in -(ch as isize)..=ch as isize {
            let lyv = t + offy;
            if lyv < ly.0 || lyv > ly.1 {
                continue;
            }
            let ry = lyv.rem_euclid(fh as isize) as usize;
            for s in -(cw as isize)..=cw as isize {
                let lxv = s + offx;
                if lxv < lx.0 || lxv > lx.1 {
                    continue;
                }
                let rx = lxv.rem_euclid(fw as isize) as usize;
                let v = prod[ry * fw + rx].re / norm;
                out[(t + ch as isize) as usize * nw + (s + cw as isize) as usize] = v.round().max(0.0) as u64;
            }
        }
    });
    out
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Smallest `m ≥ n` whose prime factors are 2, 3 and 5.
fn smooth_size(n: usize) -> usize {
    (n.max(1)..)
        .find(|&m| {
            let mut r = m;
            for p in [2, 3, 5] {
                while r % p == 0 {
                    r /= p;
                }
            }
            r == 1
        })
        .expect("unbounded range")
}

fn fft2(data: &mut [Complex<f64>], w: usize, h: usize, row: &Arc<dyn Fft<f64>>, col: &Arc<dyn Fft<f64>>) {
    for r in data.chunks_exact_mut(w) {
        row.process(r);
    }
    let mut buf = vec![Complex::new(0.0, 0.0); h];
    for x in 0..w {
        for y in 0..h {
            buf[y] = data[y * w + x];
        }
        col.process(&mut buf);
        for y in 0..h {
            data[y * w + x] = buf[y];
        }
    }
}

/// Zero-pads `m` on the right and bottom to `w × h`.
fn padded(m: &BinaryMask, w: usize, h: usize) -> BinaryMask {
    if m.width() == w && m.height() == h {
        return m.clone();
    }
    BinaryMask::from_fn(w, h, |x, y| x < m.width() && y < m.height() && m.get(x, y))
}

/// Best-shift Dice overlap `2·Σ A(p)·B(p + v) / (ΣA + ΣB)` over the shift
/// window. Ties prefer the smallest `|s| + |t|`, then scan order.
pub fn miura_match(a: &BinaryMask, b: &BinaryMask, params: &MatchParams) -> MatchResult {
    let (w, h) = (a.width().max(b.width()), a.height().max(b.height()));
    let (a, b) = (padded(a, w, h), padded(b, w, h));
    let (na, nb) = (a.count() as u64, b.count() as u64);
    if na + nb == 0 {
        log::warn!("miura_match: both maps empty, score defined as 0");
        return MatchResult { score: 0.0, shift: (0, 0), overlap: 0, both_empty: true };
    }
    let counts = overlap_counts(&a, &b, params.cw, params.ch);
    let (nw, cw, ch) = (2 * params.cw + 1, params.cw as isize, params.ch as isize);
    let mut best = (0u64, (0isize, 0isize));
    for (i, &c) in counts.iter().enumerate() {
        let shift = ((i % nw) as isize - cw, (i / nw) as isize - ch);
        let l1 = |v: (isize, isize)| v.0.abs() + v.1.abs();
        if c > best.0 || (c == best.0 && l1(shift) < l1(best.1)) {
            best = (c, shift);
        }
    }
    MatchResult { score: 2.0 * best.0 as f64 / (na + nb) as f64, shift: best.1, overlap: best.0, both_empty: false }
}
