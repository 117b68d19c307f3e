use crate::error::{Error, Result};

use super::image::{BinaryMask, ImageGray};

/// Otsu threshold over the full `2^bit_depth` histogram.
///
/// Returns the threshold `t` maximizing the between-class variance of the
/// split `{v ≤ t} / {v > t}` and the mask `v > t`. When several thresholds
/// tie (empty bins between the modes), the middle of the tied run is taken.
pub fn otsu_threshold(img: &ImageGray) -> Result<(u16, BinaryMask)> {
    if img.is_empty() {
        return Err(Error::InvalidImage("empty image".into()));
    }
    let levels = img.bit_depth().levels();
    let mut hist = vec![0u64; levels];
    for &v in img.data() {
        hist[v as usize] += 1;
    }
    let t = otsu_from_histogram(&hist)?;
    let mask = BinaryMask::from_vec(
        img.width(),
        img.height(),
        img.data().iter().map(|&v| v > t).collect(),
    )?;
    Ok((t, mask))
}

/// Threshold index from a histogram; shared by the image entry point.
pub fn otsu_from_histogram(hist: &[u64]) -> Result<u16> {
    let total: u64 = hist.iter().sum();
    let occupied = hist.iter().filter(|&&c| c > 0).count();
    if total == 0 || occupied < 2 {
        return Err(Error::DegenerateHistogram);
    }
    let total_f = total as f64;
    let sum_all: f64 = hist.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum();

    let mut w0 = 0u64;
    let mut sum0 = 0.0f64;
    let mut best = f64::NEG_INFINITY;
    let mut first = 0usize;
    let mut last = 0usize;
    // The last bin is never a valid split (class 1 would be empty).
    for (t, &c) in hist.iter().enumerate().take(hist.len() - 1) {
        w0 += c;
        sum0 += t as f64 * c as f64;
        if w0 == 0 || w0 == total {
            continue;
        }
        let w1 = total - w0;
        let mu0 = sum0 / w0 as f64;
        let mu1 = (sum_all - sum0) / w1 as f64;
        let var = (w0 as f64 / total_f) * (w1 as f64 / total_f) * (mu0 - mu1) * (mu0 - mu1);
        if var > best {
            best = var;
            first = t;
            last = t;
        } else if var == best && last + 1 == t {
            last = t;
        }
    }
    Ok(((first + last) / 2) as u16)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::BitDepth;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Between-class variance computed directly from pixels.
    fn variance_oracle(data: &[u16], t: u16) -> f64 {
        let (lo, hi): (Vec<f64>, Vec<f64>) = (
            data.iter().filter(|&&v| v <= t).map(|&v| v as f64).collect(),
            data.iter().filter(|&&v| v > t).map(|&v| v as f64).collect(),
        );
        if lo.is_empty() || hi.is_empty() {
            return f64::NEG_INFINITY;
        }
        let n = data.len() as f64;
        let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
        let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
        (lo.len() as f64 / n) * (hi.len() as f64 / n) * (m0 - m1).powi(2)
    }

    #[test]
    fn perfectly_bimodal_splits_modes() {
        let img = ImageGray::from_fn(20, 10, BitDepth::Eight, |x, _| if x < 10 { 10 } else { 200 });
        let (t, mask) = otsu_threshold(&img).unwrap();
        assert!(t > 10 && t < 200, "t = {t}");
        for y in 0..10 {
            for x in 0..20 {
                assert_eq!(mask.get(x, y), x >= 10);
            }
        }
    }

    #[test]
    fn constant_image_is_degenerate() {
        let img = ImageGray::filled(8, 8, BitDepth::Eight, 50);
        assert!(matches!(otsu_threshold(&img), Err(Error::DegenerateHistogram)));
    }

    #[test]
    fn matches_exhaustive_variance_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for depth in [BitDepth::Eight, BitDepth::Ten] {
            let max = depth.max_value() as f64;
            let data: Vec<u16> = (0..1000)
                .map(|i| {
                    let mu = if i % 3 == 0 { 0.25 * max } else { 0.7 * max };
                    let v: f64 = mu + rng.gen_range(-0.12..0.12) * max;
                    v.round().clamp(0.0, max) as u16
                })
                .collect();
            let img = ImageGray::from_vec(40, 25, depth, data.clone()).unwrap();
            let (t, _) = otsu_threshold(&img).unwrap();
            let best = (0..depth.max_value()).map(|c| variance_oracle(&data, c)).fold(f64::MIN, f64::max);
            let got = variance_oracle(&data, t);
            assert!((best - got).abs() <= 1e-9 * best, "{best} vs {got}");
        }
    }

    #[test]
    fn shifting_modes_shifts_threshold() {
        let base = |k: u16| ImageGray::from_fn(30, 10, BitDepth::Ten, move |x, y| {
            if (x + y) % 3 == 0 { 100 + k + (x % 4) as u16 } else { 600 + k + (y % 5) as u16 }
        });
        let (t0, _) = otsu_threshold(&base(0)).unwrap();
        for k in [1u16, 17, 200] {
            let (tk, _) = otsu_threshold(&base(k)).unwrap();
            assert_eq!(tk, t0 + k);
        }
    }
}
