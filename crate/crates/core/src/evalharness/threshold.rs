use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Error rates in percent. A comparison matches iff `score ≥ threshold`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub fmr: f64,
    pub fnmr: f64,
    pub hter: f64,
    pub genuine: usize,
    pub impostor: usize,
}

impl Metrics {
    /// Rates rounded to two decimals; HTER is rounded from the unrounded rates.
    pub fn rounded(&self) -> Metrics {
        Metrics { fmr: round2(self.fmr), fnmr: round2(self.fnmr), hter: round2(self.hter), ..*self }
    }
}

pub fn hter(fmr: f64, fnmr: f64) -> f64 {
    (fmr + fnmr) / 2.0
}

/// Rounds half away from zero at the second decimal, after snapping off
/// binary representation error below 1e-6 of the last digit.
pub fn round2(x: f64) -> f64 {
    let cents = (x * 100.0 * 1e6).round() / 1e6;
    cents.round() / 100.0
}

/// Smallest value strictly greater than `x` in steps of at least one ulp.
fn just_above<T: Real>(x: T) -> T {
    x + x.abs().max(T::one()) * T::epsilon()
}

/// Threshold admitting the largest number of impostor matches `k` with
/// `k / N ≤ target_fmr`.
///
/// With impostor scores sorted descending, the threshold is the midpoint
/// between the `k`-th and `(k+1)`-th score, where `k` is reduced past any
/// run of ties so that exactly `k` impostors match. With `k = 0` it lies
/// just above the highest impostor score.
pub fn threshold_at_fmr<T: Real>(impostor: &[T], target_fmr: f64) -> Result<T> {
    if impostor.is_empty() {
        return Err(Error::EmptyImpostorSet);
    }
    if !(0.0..=1.0).contains(&target_fmr) {
        return Err(Error::InvalidParam(format!("target FMR {target_fmr} outside [0, 1]")));
    }
    if impostor.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidParam("NaN impostor score".into()));
    }
    let mut imp = impostor.to_vec();
    imp.sort_by(|a, b| b.partial_cmp(a).expect("no NaN"));
    let n = imp.len();
    let mut k = ((target_fmr * n as f64).floor() as usize).min(n);
    if k == n {
        return Ok(imp[n - 1]);
    }
    while k > 0 && imp[k - 1] == imp[k] {
        k -= 1;
    }
    if k == 0 {
        return Ok(just_above(imp[0]));
    }
    let (hi, lo) = (imp[k - 1], imp[k]);
    let mid = (hi + lo) / T::lit(2.0);
    Ok(if mid > lo { mid } else { just_above(lo).min(hi) })
}

/// FMR, FNMR and HTER of `(score, genuine)` pairs at `threshold`.
pub fn metrics<T: Real>(scores: &[(T, bool)], threshold: T) -> Result<Metrics> {
    let genuine = scores.iter().filter(|s| s.1).count();
    let impostor = scores.len() - genuine;
    if genuine == 0 {
        return Err(Error::MissingClass("genuine"));
    }
    if impostor == 0 {
        return Err(Error::MissingClass("impostor"));
    }
    let false_match = scores.iter().filter(|s| !s.1 && s.0 >= threshold).count();
    let false_non_match = scores.iter().filter(|s| s.1 && !(s.0 >= threshold)).count();
    let fmr = 100.0 * false_match as f64 / impostor as f64;
    let fnmr = 100.0 * false_non_match as f64 / genuine as f64;
    Ok(Metrics { fmr, fnmr, hter: hter(fmr, fnmr), genuine, impostor })
}
