//! Soft-margin RBF support vector classifier trained by sequential minimal
//! optimization with second-order working-set selection.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SvmParams {
    pub c: f64,
    /// RBF width; `None` selects [`default_gamma`] from the training data.
    pub gamma: Option<f64>,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Recorded with the model. Training itself draws no random numbers.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams { c: 1.0, gamma: None, tol: 1e-6, max_iter: 1_000_000, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel<T> {
    pub gamma: T,
    pub c: T,
    pub support: Vec<Vec<T>>,
    /// `αᵢ·yᵢ` per support vector.
    pub coef: Vec<T>,
    pub bias: T,
    pub iterations: usize,
    pub seed: u64,
}

/// `1 / (d · var(x))` over all coordinates of all samples.
pub fn default_gamma<T: Real>(x: &[Vec<T>]) -> Result<T> {
    let vals: Vec<f64> = x.iter().flatten().map(|v| v.as_f64()).collect();
    let d = x.first().map_or(0, |v| v.len());
    if vals.is_empty() || d == 0 {
        return Err(Error::InvalidParam("no training features".into()));
    }
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / vals.len() as f64;
    if !(var > 0.0) {
        return Err(Error::InvalidParam("training features have zero variance".into()));
    }
    Ok(T::lit(1.0 / (d as f64 * var)))
}

fn rbf<T: Real>(gamma: T, a: &[T], b: &[T]) -> T {
    let d2 = a.iter().zip(b).fold(T::zero(), |acc, (&p, &q)| acc + (p - q) * (p - q));
    (-gamma * d2).exp()
}

fn lex_cmp<T: Real>(a: &(Vec<T>, bool), b: &(Vec<T>, bool)) -> Ordering {
    for (p, q) in a.0.iter().zip(&b.0) {
        match p.as_f64().total_cmp(&q.as_f64()) {
            Ordering::Equal => {}
            o => return o,
        }
    }
    a.1.cmp(&b.1)
}

/// Trains on `x` with labels `y` (`true` = positive class).
///
/// Samples are sorted lexicographically before training, so the model is
/// bit-identical for any permutation of the input.
pub fn svm_train<T: Real>(x: &[Vec<T>], y: &[bool], params: &SvmParams) -> Result<SvmModel<T>> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch(format!("{} samples, {} labels", x.len(), y.len())));
    }
    if !y.iter().any(|&l| l) {
        return Err(Error::MissingClass("positive"));
    }
    if y.iter().all(|&l| l) {
        return Err(Error::MissingClass("negative"));
    }
    let dim = x[0].len();
    if x.iter().any(|v| v.len() != dim || v.iter().any(|c| !c.is_finite())) {
        return Err(Error::InvalidParam("training vectors must be finite and of equal length".into()));
    }
    if !(params.c > 0.0) || !(params.tol > 0.0) {
        return Err(Error::InvalidParam("svm c and tol must be positive".into()));
    }
    let mut data: Vec<(Vec<T>, bool)> = x.iter().cloned().zip(y.iter().copied()).collect();
    data.sort_by(lex_cmp);
    let gamma = match params.gamma {
        Some(g) if g > 0.0 => T::lit(g),
        Some(_) => return Err(Error::InvalidParam("svm gamma must be positive".into())),
        None => default_gamma(&data.iter().map(|d| d.0.clone()).collect::<Vec<_>>())?,
    };
    let c = T::lit(params.c);
    let n = data.len();
    let ys: Vec<T> = data.iter().map(|d| if d.1 { T::one() } else { -T::one() }).collect();
    let mut k = vec![T::zero(); n * n];
    for i in 0..n {
        for j in i..n {
            let v = rbf(gamma, &data[i].0, &data[j].0);
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    let q = |i: usize, j: usize| ys[i] * ys[j] * k[i * n + j];

    let mut alpha = vec![T::zero(); n];
    let mut grad = vec![-T::one(); n];
    let tau = T::lit(1e-12);
    let tol = T::lit(params.tol);
    let up = |a: T, y: T| (y > T::zero() && a < c) || (y < T::zero() && a > T::zero());
    let low = |a: T, y: T| (y > T::zero() && a > T::zero()) || (y < T::zero() && a < c);

    let mut iterations = 0;
    while iterations < params.max_iter {
        // i: maximal violator in the up set
        let mut gmax = T::neg_infinity();
        let mut i = usize::MAX;
        for t in 0..n {
            if up(alpha[t], ys[t]) {
                let v = -ys[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i = t;
                }
            }
        }
        // j: largest second-order decrease among low-set violators
        let mut gmin = T::infinity();
        let mut j = usize::MAX;
        let mut best = T::infinity();
        for t in 0..n {
            if !low(alpha[t], ys[t]) {
                continue;
            }
            let v = -ys[t] * grad[t];
            if v < gmin {
                gmin = v;
            }
            if i != usize::MAX {
                let b = gmax - v;
                if b > T::zero() {
                    let mut a = k[i * n + i] + k[t * n + t] - T::lit(2.0) * k[i * n + t];
                    if a <= T::zero() {
                        a = tau;
                    }
                    let obj = -(b * b) / a;
                    if obj < best {
                        best = obj;
                        j = t;
                    }
                }
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }
        iterations += 1;

        let (yi, yj) = (ys[i], ys[j]);
        let (ai_old, aj_old) = (alpha[i], alpha[j]);
        let mut a = k[i * n + i] + k[j * n + j] - T::lit(2.0) * k[i * n + j];
        if a <= T::zero() {
            a = tau;
        }
        if yi != yj {
            let delta = (-grad[i] - grad[j]) / a;
            let diff = alpha[i] - alpha[j];
            alpha[i] = alpha[i] + delta;
            alpha[j] = alpha[j] + delta;
            if diff > T::zero() {
                if alpha[j] < T::zero() {
                    alpha[j] = T::zero();
                    alpha[i] = diff;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = -diff;
            }
            if diff > T::zero() {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / a;
            let sum = alpha[i] + alpha[j];
            alpha[i] = alpha[i] - delta;
            alpha[j] = alpha[j] + delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < T::zero() {
                alpha[j] = T::zero();
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < T::zero() {
                alpha[i] = T::zero();
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - ai_old, alpha[j] - aj_old);
        for t in 0..n {
            grad[t] = grad[t] + q(t, i) * di + q(t, j) * dj;
        }
    }
    if iterations == params.max_iter {
        log::warn!("svm_train: iteration limit {} reached", params.max_iter);
    }

    // bias from free vectors, else the middle of the feasible interval
    let (mut ub, mut lb) = (T::infinity(), T::neg_infinity());
    let (mut sum_free, mut n_free) = (T::zero(), 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        let pos = ys[t] > T::zero();
        if alpha[t] >= c {
            if pos {
                lb = lb.max(yg);
            } else {
                ub = ub.min(yg);
            }
        } else if alpha[t] <= T::zero() {
            if pos {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free = sum_free + yg;
        }
    }
    let rho = if n_free > 0 { sum_free / T::from_usize_lossy(n_free) } else { (ub + lb) / T::lit(2.0) };

    let mut support = Vec::new();
    let mut coef = Vec::new();
    for t in 0..n {
        if alpha[t] > T::zero() {
            support.push(data[t].0.clone());
            coef.push(alpha[t] * ys[t]);
        }
    }
    Ok(SvmModel { gamma, c, support, coef, bias: -rho, iterations, seed: params.seed })
}

/// Signed decision value `Σ αᵢyᵢ k(xᵢ, x) + b`; positive means the positive class.
pub fn svm_decision<T: Real>(model: &SvmModel<T>, x: &[T]) -> T {
    model.support.iter().zip(&model.coef).fold(model.bias, |acc, (sv, &a)| acc + a * rbf(model.gamma, sv, x))
}

impl<T: Real> SvmModel<T> {
    pub fn decision(&self, x: &[T]) -> T {
        svm_decision(self, x)
    }
}
