use rayon::prelude::*;

use crate::imgcore::BinaryMask;

use super::sgm::AggregatedVolume;
use super::{DisparityMap, SgmParams, INVALID_DISPARITY};

/// Vertex of the parabola through `(−1, c_minus), (0, c0), (1, c_plus)`;
/// zero when the three costs are not strictly convex.
pub fn parabola_offset(c_minus: f64, c0: f64, c_plus: f64) -> f64 {
    let denom = 2.0 * (c_minus + c_plus - 2.0 * c0);
    if denom > 0.0 {
        ((c_minus - c_plus) / denom).clamp(-0.5, 0.5)
    } else {
        0.0
    }
}

fn argmin(c: &[u16]) -> usize {
    let mut best = 0;
    for d in 1..c.len() {
        if c[d] < c[best] {
            best = d;
        }
    }
    best
}

/// Winner-take-all with subpixel refinement, uniqueness and left-right
/// consistency gating.
pub fn disparity_select(agg: &AggregatedVolume, params: &SgmParams) -> DisparityMap {
    let (w, h, nd) = (agg.width, agg.height, agg.ndisp);
    let d_min = agg.d_min;
    let mut d = vec![INVALID_DISPARITY; w * h];
    let mut valid = vec![false; w * h];

    d.par_chunks_mut(w).zip(valid.par_chunks_mut(w)).enumerate().for_each(|(y, (drow, vrow))| {
        // right-view winners: pixel q matches left pixel q + k + d_min
        let right: Vec<Option<usize>> = (0..w)
            .map(|q| {
                let mut best: Option<(u16, usize)> = None;
                for k in 0..nd {
                    let x = q + d_min + k;
                    if x >= w {
                        break;
                    }
                    let s = agg.at(x, y)[k];
                    if best.map_or(true, |(b, _)| s < b) {
                        best = Some((s, k));
                    }
                }
                best.map(|(_, k)| k + d_min)
            })
            .collect();

        for x in 0..w {
            let c = agg.at(x, y);
            let k = argmin(c);
            let best = c[k];
            let second = c.iter().enumerate().filter(|(j, _)| j.abs_diff(k) > 1).map(|(_, &v)| v).min();
            if let Some(second) = second {
                if !((best as f64) < params.uniqueness_ratio as f64 * second as f64) {
                    continue;
                }
            }
            let offset = if k > 0 && k + 1 < nd {
                parabola_offset(c[k - 1] as f64, best as f64, c[k + 1] as f64)
            } else {
                0.0
            };
            let disp = (d_min + k) as f64 + offset;
            let q = x as isize - (d_min + k) as isize;
            if q < 0 {
                continue;
            }
            let Some(dr) = right[q as usize] else { continue };
            if (disp - dr as f64).abs() > params.lr_max_diff as f64 {
                continue;
            }
            drow[x] = disp as f32;
            vrow[x] = true;
        }
    });

    DisparityMap {
        width: w,
        height: h,
        d,
        valid: BinaryMask::from_vec(w, h, valid).expect("shape matches"),
        d_min: agg.d_min,
        d_max: agg.d_min + nd - 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parabola_vertex() {
        assert_eq!(parabola_offset(5.0, 0.0, 5.0), 0.0);
        assert!((parabola_offset(2.0, 0.0, 1.0) - 1.0 / 6.0).abs() < 1e-12);
        assert!((parabola_offset(1.0, 0.0, 2.0) + 1.0 / 6.0).abs() < 1e-12);
        assert_eq!(parabola_offset(1.0, 1.0, 1.0), 0.0);
    }

    fn volume(w: usize, nd: usize, f: impl Fn(usize, usize) -> u16) -> AggregatedVolume {
        let mut data = Vec::new();
        for x in 0..w {
            for d in 0..nd {
                data.push(f(x, d));
            }
        }
        AggregatedVolume { width: w, height: 1, d_min: 0, ndisp: nd, data }
    }

    #[test]
    fn consistent_volume_selects_subpixel_minimum() {
        // every pixel prefers d = 3 with an asymmetric neighbourhood
        let v = volume(20, 8, |_, d| match d {
            2 => 20,
            3 => 0,
            4 => 10,
            _ => 100,
        });
        let p = SgmParams { d_min: 0, d_max: 7, ..SgmParams::default() };
        let m = disparity_select(&v, &p);
        for x in 3..20 {
            let d = m.get(x, 0).unwrap();
            assert!((d - (3.0 + 10.0 / 60.0)).abs() < 1e-6, "{d}");
        }
        for x in 0..3 {
            assert!(m.get(x, 0).is_none());
            assert_eq!(m.d[x], INVALID_DISPARITY);
        }
    }

    #[test]
    fn ambiguous_minimum_fails_uniqueness() {
        let v = volume(20, 8, |_, d| if d == 1 || d == 5 { 10 } else { 50 });
        let p = SgmParams { d_min: 0, d_max: 7, ..SgmParams::default() };
        let m = disparity_select(&v, &p);
        assert!(m.valid.is_empty());
    }

    #[test]
    fn lr_check_rejects_inconsistent_match() {
        // pixel 10 picks d = 2, but right pixel 8 is claimed more cheaply by
        // left pixel 14 at d = 6
        let v = volume(20, 8, |x, d| match (x, d) {
            (10, 2) => 5,
            (14, 6) => 1,
            _ => 60,
        });
        let p = SgmParams { d_min: 0, d_max: 7, ..SgmParams::default() };
        let m = disparity_select(&v, &p);
        assert!(m.get(10, 0).is_none());
        assert_eq!(m.get(14, 0), Some(6.0));
    }
}
