use crate::error::{Error, Result};
use crate::imgcore::Plane;
use crate::scalar::Real;

use super::NormalField;

/// Normals flatter than this cannot yield a finite gradient.
const MIN_NZ: f64 = 1e-2;

/// Relative height (pixel units, toward the camera) whose gradients best fit
/// `p = −n_x/n_z`, `q = −n_y/n_z` in the least-squares sense.
///
/// Each 4-connected component of the valid region is solved independently
/// and shifted so its pixel nearest the component centroid is zero. Invalid
/// pixels are NaN.
pub fn integrate_depth<T: Real>(field: &NormalField<T>) -> Result<Plane<T>> {
    let (w, h) = (field.width, field.height);
    let usable: Vec<bool> = (0..w * h).map(|i| field.valid.bits()[i] && field.n[i].z().as_f64() >= MIN_NZ).collect();
    if !usable.iter().any(|&u| u) {
        return Err(Error::EmptyRegion);
    }
    let grad: Vec<(f64, f64)> = (0..w * h)
        .map(|i| {
            if !usable[i] {
                return (0.0, 0.0);
            }
            let n = field.n[i];
            let nz = n.z().as_f64();
            (-n.x().as_f64() / nz, -n.y().as_f64() / nz)
        })
        .collect();

    // edges (a, b, target for z_b − z_a)
    let mut edges = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if !usable[i] {
                continue;
            }
            if x + 1 < w && usable[i + 1] {
                edges.push((i, i + 1, (grad[i].0 + grad[i + 1].0) / 2.0));
            }
            if y + 1 < h && usable[i + w] {
                edges.push((i, i + w, (grad[i].1 + grad[i + w].1) / 2.0));
            }
        }
    }

    let n = w * h;
    let mut degree = vec![0.0f64; n];
    let mut b = vec![0.0f64; n];
    for &(a, c, g) in &edges {
        degree[a] += 1.0;
        degree[c] += 1.0;
        b[c] += g;
        b[a] -= g;
    }
    let apply = |z: &[f64], out: &mut [f64]| {
        for (o, (&d, &zi)) in out.iter_mut().zip(degree.iter().zip(z)) {
            *o = d * zi;
        }
        for &(a, c, _) in &edges {
            out[a] -= z[c];
            out[c] -= z[a];
        }
    };
    let z = pcg(n, &apply, &b, &degree);

    let labels = components4(w, h, &usable);
    let mut out = Plane::filled(w, h, T::nan());
    let count = labels.iter().filter_map(|l| *l).max().map_or(0, |m| m + 1);
    let mut sums = vec![(0.0, 0.0, 0usize); count];
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = *l {
            sums[l].0 += (i % w) as f64;
            sums[l].1 += (i / w) as f64;
            sums[l].2 += 1;
        }
    }
    let mut anchor = vec![(f64::MAX, 0.0); count];
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = *l {
            let (sx, sy, k) = sums[l];
            let (cx, cy) = (sx / k as f64, sy / k as f64);
            let d2 = ((i % w) as f64 - cx).powi(2) + ((i / w) as f64 - cy).powi(2);
            if d2 < anchor[l].0 {
                anchor[l] = (d2, z[i]);
            }
        }
    }
    for (i, l) in labels.iter().enumerate() {
        if let Some(l) = *l {
            out.data[i] = T::lit(z[i] - anchor[l].1);
        }
    }
    Ok(out)
}

fn components4(w: usize, h: usize, usable: &[bool]) -> Vec<Option<usize>> {
    let mut labels = vec![None; w * h];
    let mut next = 0;
    let mut stack = Vec::new();
    for start in 0..w * h {
        if !usable[start] || labels[start].is_some() {
            continue;
        }
        labels[start] = Some(next);
        stack.push(start);
        while let Some(i) = stack.pop() {
            let (x, y) = (i % w, i / w);
            let mut visit = |j: usize| {
                if usable[j] && labels[j].is_none() {
                    labels[j] = Some(next);
                    stack.push(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        next += 1;
    }
    labels
}

/// Jacobi-preconditioned conjugate gradient for the consistent, positive
/// semi-definite graph Laplacian system. Isolated nodes stay at zero.
fn pcg(n: usize, apply: &dyn Fn(&[f64], &mut [f64]), b: &[f64], diag: &[f64]) -> Vec<f64> {
    let inv: Vec<f64> = diag.iter().map(|&d| if d > 0.0 { 1.0 / d } else { 0.0 }).collect();
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv).map(|(a, m)| a * m).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        return x;
    }
    let mut ap = vec![0.0; n];
    for _ in 0..(4 * n).max(100) {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if dot(&r, &r).sqrt() <= 1e-12 * b_norm {
            break;
        }
        for i in 0..n {
            z[i] = r[i] * inv[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imgcore::BinaryMask;
    use crate::linalg::Vec3;

    fn field(w: usize, h: usize, f: impl Fn(f64, f64) -> Option<Vec3<f64>>) -> NormalField<f64> {
        let mut n = vec![Vec3::zero(); w * h];
        let mut valid = vec![false; w * h];
        for y in 0..h {
            for x in 0..w {
                if let Some(v) = f(x as f64, y as f64) {
                    n[y * w + x] = v.normalized().unwrap();
                    valid[y * w + x] = true;
                }
            }
        }
        NormalField { width: w, height: h, n, albedo: vec![1.0; w * h], valid: BinaryMask::from_vec(w, h, valid).unwrap() }
    }

    #[test]
    fn flat_normals_give_zero_height() {
        let nf = field(20, 15, |_, _| Some(Vec3::new(0.0, 0.0, 1.0)));
        let z = integrate_depth(&nf).unwrap();
        assert!(z.data.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn tilted_plane_slope() {
        // h = 0.3 x − 0.2 y
        let nf = field(30, 20, |_, _| Some(Vec3::new(-0.3, 0.2, 1.0)));
        let z = integrate_depth(&nf).unwrap();
        for y in 0..19 {
            for x in 0..29 {
                assert!((z.get(x + 1, y) - z.get(x, y) - 0.3).abs() < 1e-3);
                assert!((z.get(x, y + 1) - z.get(x, y) + 0.2).abs() < 1e-3);
            }
        }
        // centroid (14.5, 9.5); the first nearest pixel in scan order anchors
        assert_eq!(z.get(14, 9), 0.0);
    }

    #[test]
    fn hemisphere_height() {
        let (w, h, r) = (81usize, 81usize, 36.0);
        let c = 40.0;
        let inside = |x: f64, y: f64| {
            let (dx, dy) = (x - c, y - c);
            let nz2 = r * r - dx * dx - dy * dy;
            (nz2 > (0.3 * r).powi(2)).then(|| (dx, dy, nz2.sqrt()))
        };
        let nf = field(w, h, |x, y| inside(x, y).map(|(dx, dy, nz)| Vec3::new(dx, dy, nz)));
        let z = integrate_depth(&nf).unwrap();
        let mut diffs = Vec::new();
        for y in 0..h {
            for x in 0..w {
                if let Some((_, _, nz)) = inside(x as f64, y as f64) {
                    diffs.push(z.get(x, y) - nz);
                }
            }
        }
        let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
        let rmse = (diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / diffs.len() as f64).sqrt();
        assert!(rmse < 0.02 * r, "rmse {rmse}");
        assert!(z.get(0, 0).is_nan());
    }

    #[test]
    fn empty_region_errors() {
        let nf = field(5, 5, |_, _| None);
        assert!(matches!(integrate_depth(&nf), Err(Error::EmptyRegion)));
    }
}
