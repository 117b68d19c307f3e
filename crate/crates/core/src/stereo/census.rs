use crate::imgcore::ImageGray;

/// Census transform with a square window; neighbours darker than the centre
/// set a bit. Border pixels replicate the edge.
pub fn census_transform(img: &ImageGray, window: usize) -> Vec<u64> {
    let (w, h) = (img.width(), img.height());
    let r = (window / 2) as isize;
    let mut out = vec![0u64; w * h];
    let clamp = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    for y in 0..h {
        for x in 0..w {
            let c = img.get(x, y);
            let mut code = 0u64;
            for dy in -r..=r {
                let yy = clamp(y as isize + dy, h);
                for dx in -r..=r {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let xx = clamp(x as isize + dx, w);
                    code = (code << 1) | (img.get(xx, yy) < c) as u64;
                }
            }
            out[y * w + x] = code;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::BitDepth;

    #[test]
    fn centre_brighter_than_all_neighbours_sets_every_bit() {
        let mut img = ImageGray::filled(5, 5, BitDepth::Eight, 10);
        img.set(2, 2, 200);
        let c = census_transform(&img, 3);
        assert_eq!(c[2 * 5 + 2], 0xFF);
        assert_eq!(c[0], 0);
        let c5 = census_transform(&img, 5);
        assert_eq!(c5[2 * 5 + 2].count_ones(), 24);
    }
}
