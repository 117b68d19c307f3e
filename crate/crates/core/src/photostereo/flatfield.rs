use crate::error::{Error, Result};
use crate::imgcore::{BinaryMask, ImageGray};
use crate::scalar::Real;

use super::SATURATION_FRACTION;

/// Per-light multiplicative gain that maps each reference frame onto its own
/// spatial median.
#[derive(Debug, Clone, PartialEq)]
pub struct FlatField<T> {
    pub width: usize,
    pub height: usize,
    /// `gains[light][pixel]`, zero where invalid.
    pub gains: Vec<Vec<T>>,
    pub valid: BinaryMask,
}

/// Reference pixels below this fraction of the median carry no usable signal.
const MIN_REFERENCE_FRACTION: f64 = 0.01;

fn median(values: &[u16]) -> f64 {
    let mut v = values.to_vec();
    v.sort_unstable();
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2] as f64
    } else {
        (v[n / 2 - 1] as f64 + v[n / 2] as f64) / 2.0
    }
}

pub fn flatfield_calibrate<T: Real>(refs: &[ImageGray]) -> Result<FlatField<T>> {
    let first = refs.first().ok_or_else(|| Error::UnusableReference("no reference frames".into()))?;
    let (w, h) = (first.width(), first.height());
    if refs.iter().any(|r| r.width() != w || r.height() != h) {
        return Err(Error::DimensionMismatch("reference frames differ in size".into()));
    }
    let mut valid = vec![true; w * h];
    let mut gains = Vec::with_capacity(refs.len());
    for r in refs {
        let sat = (SATURATION_FRACTION * r.full_scale() as f64).ceil() as u16;
        let saturated = r.data().iter().filter(|&&v| v >= sat).count();
        if 2 * saturated > r.len() {
            return Err(Error::UnusableReference(format!("{saturated} of {} pixels saturated", r.len())));
        }
        let target = median(r.data());
        if target <= 0.0 {
            return Err(Error::UnusableReference("median intensity is zero".into()));
        }
        let floor = (MIN_REFERENCE_FRACTION * target).max(1.0);
        let g: Vec<T> = r
            .data()
            .iter()
            .zip(valid.iter_mut())
            .map(|(&v, ok)| {
                if (v as f64) < floor || v >= sat {
                    *ok = false;
                    T::zero()
                } else {
                    T::lit(target / v as f64)
                }
            })
            .collect();
        gains.push(g);
    }
    for g in gains.iter_mut() {
        for (gi, &ok) in g.iter_mut().zip(&valid) {
            if !ok {
                *gi = T::zero();
            }
        }
    }
    Ok(FlatField { width: w, height: h, gains, valid: BinaryMask::from_vec(w, h, valid)? })
}

impl<T: Real> FlatField<T> {
    /// Gain-corrected intensities of `frame` for light `light`.
    pub fn apply(&self, light: usize, frame: &ImageGray) -> Vec<T> {
        frame.data().iter().zip(&self.gains[light]).map(|(&v, &g)| T::from_u16(v).expect("u16 fits") * g).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::BitDepth;

    #[test]
    fn uniform_reference_has_unit_gain() {
        let r = ImageGray::filled(10, 8, BitDepth::Ten, 500);
        let ff = flatfield_calibrate::<f64>(&[r.clone(), r]).unwrap();
        assert!(ff.gains.iter().flatten().all(|&g| g == 1.0));
        assert_eq!(ff.valid.count(), 80);
    }

    #[test]
    fn radial_falloff_flattened() {
        let (w, h) = (64, 48);
        let f = 40.0;
        let r = ImageGray::from_fn(w, h, BitDepth::Ten, |x, y| {
            let (dx, dy) = (x as f64 - 31.5, y as f64 - 23.5);
            let c = f / (f * f + dx * dx + dy * dy).sqrt();
            (900.0 * c.powi(4)).round() as u16
        });
        let ff = flatfield_calibrate::<f64>(&[r.clone()]).unwrap();
        let flat = ff.apply(0, &r);
        let (lo, hi) = flat.iter().fold((f64::MAX, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
        assert!((hi - lo) / hi < 0.01, "{lo} {hi}");
    }

    #[test]
    fn unusable_references() {
        let zero = ImageGray::filled(4, 4, BitDepth::Ten, 0);
        assert!(matches!(flatfield_calibrate::<f64>(&[zero]), Err(Error::UnusableReference(_))));
        let sat = ImageGray::from_fn(4, 4, BitDepth::Ten, |x, _| if x < 3 { 1023 } else { 100 });
        assert!(matches!(flatfield_calibrate::<f64>(&[sat]), Err(Error::UnusableReference(_))));
        assert!(matches!(flatfield_calibrate::<f64>(&[]), Err(Error::UnusableReference(_))));
    }

    #[test]
    fn dark_reference_pixels_invalid() {
        let r = ImageGray::from_fn(5, 5, BitDepth::Ten, |x, y| if (x, y) == (1, 1) { 0 } else { 400 });
        let ff = flatfield_calibrate::<f64>(&[r]).unwrap();
        assert!(!ff.valid.get(1, 1));
        assert_eq!(ff.gains[0][6], 0.0);
        assert_eq!(ff.valid.count(), 24);
    }
}
