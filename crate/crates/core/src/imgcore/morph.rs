//! Binary morphology with a disc structuring element.
//!
//! Pixels outside the frame are ignored (neither foreground nor background),
//! so regions touching the border are not eroded from outside.

use super::image::BinaryMask;

/// Half-width of the disc at each row offset `dy ∈ [−r, r]`.
fn disc_spans(radius: usize) -> Vec<(isize, usize)> {
    let r = radius as isize;
    (-r..=r)
        .map(|dy| {
            let hw = ((r * r - dy * dy) as f64).sqrt().floor() as usize;
            (dy, hw)
        })
        .collect()
}

/// Per-row prefix counts of set pixels, `width + 1` entries per row.
fn row_prefix(mask: &BinaryMask) -> Vec<u32> {
    let (w, h) = (mask.width(), mask.height());
    let mut p = vec![0u32; (w + 1) * h];
    for y in 0..h {
        let row = &mask.bits()[y * w..(y + 1) * w];
        let out = &mut p[y * (w + 1)..(y + 1) * (w + 1)];
        for x in 0..w {
            out[x + 1] = out[x] + row[x] as u32;
        }
    }
    p
}

pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let spans = disc_spans(radius);
    let prefix = row_prefix(mask);
    BinaryMask::from_fn(w, h, |x, y| {
        if !mask.get(x, y) {
            return false;
        }
        spans.iter().all(|&(dy, hw)| {
            let yy = y as isize + dy;
            if yy < 0 || yy >= h as isize {
                return true;
            }
            let x0 = x.saturating_sub(hw);
            let x1 = (x + hw + 1).min(w);
            let row = &prefix[yy as usize * (w + 1)..];
            (row[x1] - row[x0]) as usize == x1 - x0
        })
    })
}

pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    let spans = disc_spans(radius);
    let prefix = row_prefix(mask);
    BinaryMask::from_fn(w, h, |x, y| {
        if mask.get(x, y) {
            return true;
        }
        spans.iter().any(|&(dy, hw)| {
            let yy = y as isize + dy;
            if yy < 0 || yy >= h as isize {
                return false;
            }
            let x0 = x.saturating_sub(hw);
            let x1 = (x + hw + 1).min(w);
            let row = &prefix[yy as usize * (w + 1)..];
            row[x1] > row[x0]
        })
    })
}

/// Erosion followed by dilation with a disc of `radius` pixels (≥ 1).
pub fn morph_open(mask: &BinaryMask, radius: usize) -> BinaryMask {
    let radius = radius.max(1);
    dilate(&erode(mask, radius), radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Opening by definition: union of every disc placement that fits inside
    /// the mask (in-frame pixels only).
    fn open_oracle(mask: &BinaryMask, r: usize) -> BinaryMask {
        let (w, h) = (mask.width() as isize, mask.height() as isize);
        let ri = r as isize;
        let disc: Vec<(isize, isize)> = (-ri..=ri)
            .flat_map(|dy| (-ri..=ri).map(move |dx| (dx, dy)))
            .filter(|&(dx, dy)| dx * dx + dy * dy <= ri * ri)
            .collect();
        let mut out = BinaryMask::new(mask.width(), mask.height());
        for cy in 0..h {
            for cx in 0..w {
                let fits = disc.iter().all(|&(dx, dy)| {
                    let (x, y) = (cx + dx, cy + dy);
                    x < 0 || y < 0 || x >= w || y >= h || mask.get(x as usize, y as usize)
                });
                if fits {
                    for &(dx, dy) in &disc {
                        let (x, y) = (cx + dx, cy + dy);
                        if x >= 0 && y >= 0 && x < w && y < h {
                            out.set(x as usize, y as usize, true);
                        }
                    }
                }
            }
        }
        out
    }

    #[test]
    fn isolated_pixel_vanishes() {
        let mut m = BinaryMask::new(9, 9);
        m.set(4, 4, true);
        assert!(morph_open(&m, 2).is_empty());
    }

    #[test]
    fn full_frame_survives() {
        let m = BinaryMask::full(12, 7);
        assert_eq!(morph_open(&m, 2), m);
    }

    #[test]
    fn small_block_removed_large_block_kept() {
        let m = BinaryMask::from_fn(80, 70, |x, y| {
            (5..55).contains(&x) && (5..55).contains(&y) || (65..68).contains(&x) && (60..63).contains(&y)
        });
        let opened = morph_open(&m, 3);
        assert_eq!(opened, open_oracle(&m, 3));
        assert!((65..68).all(|x| (60..63).all(|y| !opened.get(x, y))));
        // interior of the big block intact
        assert!((8..52).all(|x| (8..52).all(|y| opened.get(x, y))));
        assert_eq!(opened.components().1, 1);
    }

    #[test]
    fn matches_definition_on_random_masks() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for r in 1..4 {
            let m = BinaryMask::from_fn(30, 24, |_, _| rng.gen_bool(0.7));
            let opened = morph_open(&m, r);
            assert_eq!(opened, open_oracle(&m, r));
            assert!(opened.is_subset_of(&m));
            assert_eq!(morph_open(&opened, r), opened);
        }
    }
}
