//! Matching cost volume and semi-global cost aggregation.
//!
//! Volumes are laid out `[y][x][d]` with disparity innermost so the
//! aggregation recurrence walks contiguous memory.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::imgcore::ImageGray;

use super::census::census_transform;
use super::SgmParams;

/// Per-pixel Hamming cost of census codes, `cost(x, y, d)` compares left
/// `(x, y)` with right `(x − d, y)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CostVolume {
    pub width: usize,
    pub height: usize,
    pub d_min: usize,
    pub ndisp: usize,
    /// Cost assigned when the right pixel falls outside the image.
    pub max_cost: u8,
    pub data: Vec<u8>,
}

/// Sum of the path costs `L_r` over all directions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AggregatedVolume {
    pub width: usize,
    pub height: usize,
    pub d_min: usize,
    pub ndisp: usize,
    pub data: Vec<u16>,
}

impl CostVolume {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[u8] {
        let i = (y * self.width + x) * self.ndisp;
        &self.data[i..i + self.ndisp]
    }
}

impl AggregatedVolume {
    #[inline]
    pub fn at(&self, x: usize, y: usize) -> &[u16] {
        let i = (y * self.width + x) * self.ndisp;
        &self.data[i..i + self.ndisp]
    }
}

pub fn matching_cost(left: &ImageGray, right: &ImageGray, params: &SgmParams) -> Result<CostVolume> {
    if left.width() != right.width() || left.height() != right.height() {
        return Err(Error::DimensionMismatch("stereo pair sizes differ".into()));
    }
    let (w, h) = (left.width(), left.height());
    let nd = params.ndisp();
    let max_cost = params.census_bits() as u8;
    let cl = census_transform(left, params.census_window);
    let cr = census_transform(right, params.census_window);
    let mut data = vec![0u8; w * h * nd];
    data.par_chunks_mut(w * nd).enumerate().for_each(|(y, row)| {
        for x in 0..w {
            let a = cl[y * w + x];
            let cell = &mut row[x * nd..(x + 1) * nd];
            for (k, c) in cell.iter_mut().enumerate() {
                let d = params.d_min + k;
                *c = if d <= x { (a ^ cr[y * w + x - d]).count_ones() as u8 } else { max_cost };
            }
        }
    });
    Ok(CostVolume { width: w, height: h, d_min: params.d_min, ndisp: nd, max_cost, data })
}

const PATHS_8: [(isize, isize); 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, 1), (1, -1), (-1, -1)];

/// One step of the recurrence: `out = C + min(prev[d], prev[d±1] + P1,
/// min(prev) + P2) − min(prev)`. Returns `min(out)`.
#[inline]
fn path_step(cost: &[u8], prev: &[u16], prev_min: u16, p1: u16, p2: u16, out: &mut [u16]) -> u16 {
    let nd = cost.len();
    let jump = prev_min.saturating_add(p2);
    let mut m_out = u16::MAX;
    for d in 0..nd {
        let mut m = prev[d];
        if d > 0 {
            m = m.min(prev[d - 1].saturating_add(p1));
        }
        if d + 1 < nd {
            m = m.min(prev[d + 1].saturating_add(p1));
        }
        m = m.min(jump);
        let v = cost[d] as u16 + (m - prev_min);
        out[d] = v;
        m_out = m_out.min(v);
    }
    m_out
}

#[inline]
fn first_step(cost: &[u8], out: &mut [u16]) -> u16 {
    let mut m = u16::MAX;
    for (o, &c) in out.iter_mut().zip(cost) {
        *o = c as u16;
        m = m.min(*o);
    }
    m
}

/// Semi-global aggregation over 4 or 8 path directions using the penalties
/// in `params` (not validated here, so `P1 = P2 = 0` is allowed).
pub fn aggregate_sgm(cost: &CostVolume, params: &SgmParams) -> AggregatedVolume {
    let (w, h, nd) = (cost.width, cost.height, cost.ndisp);
    let (p1, p2) = (params.p1, params.p2);
    let mut sum = vec![0u16; w * h * nd];
    let dirs = &PATHS_8[..params.paths.count()];

    for &(dx, dy) in dirs {
        if dy == 0 {
            // rows are independent
            sum.par_chunks_mut(w * nd).enumerate().for_each(|(y, row_sum)| {
                let mut prev = vec![0u16; nd];
                let mut cur = vec![0u16; nd];
                let mut prev_min = 0u16;
                let xs: Box<dyn Iterator<Item = usize>> = if dx > 0 { Box::new(0..w) } else { Box::new((0..w).rev()) };
                for (i, x) in xs.enumerate() {
                    let c = cost.at(x, y);
                    let m = if i == 0 { first_step(c, &mut cur) } else { path_step(c, &prev, prev_min, p1, p2, &mut cur) };
                    for (s, &v) in row_sum[x * nd..(x + 1) * nd].iter_mut().zip(&cur) {
                        *s += v;
                    }
                    std::mem::swap(&mut prev, &mut cur);
                    prev_min = m;
                }
            });
        } else {
            let mut prev = vec![0u16; w * nd];
            let mut prev_min = vec![0u16; w];
            let mut cur = vec![0u16; w * nd];
            let mut cur_min = vec![0u16; w];
            let ys: Vec<usize> = if dy > 0 { (0..h).collect() } else { (0..h).rev().collect() };
            for (i, &y) in ys.iter().enumerate() {
                cur.par_chunks_mut(nd).zip(cur_min.par_iter_mut()).enumerate().for_each(|(x, (out, m))| {
                    let c = cost.at(x, y);
                    let px = x as isize - dx;
                    *m = if i == 0 || px < 0 || px >= w as isize {
                        first_step(c, out)
                    } else {
                        let px = px as usize;
                        path_step(c, &prev[px * nd..(px + 1) * nd], prev_min[px], p1, p2, out)
                    };
                });
                sum[y * w * nd..(y + 1) * w * nd].par_iter_mut().zip(cur.par_iter()).for_each(|(s, &v)| *s += v);
                std::mem::swap(&mut prev, &mut cur);
                std::mem::swap(&mut prev_min, &mut cur_min);
            }
        }
    }
    AggregatedVolume { width: w, height: h, d_min: cost.d_min, ndisp: nd, data: sum }
}
