//! Small fixed-size vector and matrix types used by the camera model and the
//! per-pixel photometric solves.

use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec3<T>(pub [T; 3]);

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self([x, y, z])
    }

    pub fn zero() -> Self {
        Self([T::zero(); 3])
    }

    #[inline]
    pub fn x(&self) -> T {
        self.0[0]
    }
    #[inline]
    pub fn y(&self) -> T {
        self.0[1]
    }
    #[inline]
    pub fn z(&self) -> T {
        self.0[2]
    }

    pub fn dot(&self, o: &Self) -> T {
        self.0[0] * o.0[0] + self.0[1] * o.0[1] + self.0[2] * o.0[2]
    }

    pub fn cross(&self, o: &Self) -> Self {
        let [a, b, c] = self.0;
        let [d, e, f] = o.0;
        Self([b * f - c * e, c * d - a * f, a * e - b * d])
    }

    pub fn norm(&self) -> T {
        self.dot(self).sqrt()
    }

    /// Unit vector in the same direction; `None` for the zero vector.
    pub fn normalized(&self) -> Option<Self> {
        let n = self.norm();
        if n > T::zero() && n.is_finite() {
            Some(*self * (T::one() / n))
        } else {
            None
        }
    }

    pub fn scale(&self, k: T) -> Self {
        Self([self.0[0] * k, self.0[1] * k, self.0[2] * k])
    }

    pub fn cast<U: Real>(&self) -> Vec3<U> {
        Vec3(self.0.map(|v| U::lit(v.as_f64())))
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self([self.0[0] + o.0[0], self.0[1] + o.0[1], self.0[2] + o.0[2]])
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self([self.0[0] - o.0[0], self.0[1] - o.0[1], self.0[2] - o.0[2]])
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self(self.0.map(|v| -v))
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, k: T) -> Self {
        self.scale(k)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}

/// Row-major 3×3 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mat3<T>(pub [[T; 3]; 3]);

impl<T: Real> Mat3<T> {
    pub fn identity() -> Self {
        let (o, z) = (T::one(), T::zero());
        Self([[o, z, z], [z, o, z], [z, z, o]])
    }

    pub fn zero() -> Self {
        Self([[T::zero(); 3]; 3])
    }

    pub fn from_rows(r0: Vec3<T>, r1: Vec3<T>, r2: Vec3<T>) -> Self {
        Self([r0.0, r1.0, r2.0])
    }

    /// Builds a matrix from 9 row-major values.
    pub fn from_row_slice(v: &[T]) -> Option<Self> {
        if v.len() != 9 {
            return None;
        }
        Some(Self([[v[0], v[1], v[2]], [v[3], v[4], v[5]], [v[6], v[7], v[8]]]))
    }

    pub fn to_row_vec(&self) -> Vec<T> {
        self.0.iter().flatten().copied().collect()
    }

    pub fn row(&self, i: usize) -> Vec3<T> {
        Vec3(self.0[i])
    }

    pub fn transpose(&self) -> Self {
        let m = &self.0;
        Self([
            [m[0][0], m[1][0], m[2][0]],
            [m[0][1], m[1][1], m[2][1]],
            [m[0][2], m[1][2], m[2][2]],
        ])
    }

    pub fn det(&self) -> T {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; `None` when the determinant vanishes.
    pub fn inverse(&self) -> Option<Self> {
        let d = self.det();
        if d == T::zero() || !d.is_finite() {
            return None;
        }
        let m = &self.0;
        let inv_d = T::one() / d;
        let c = |a: usize, b: usize, c: usize, e: usize| m[a][b] * m[c][e] - m[a][e] * m[c][b];
        Some(Self([
            [c(1, 1, 2, 2) * inv_d, -c(0, 1, 2, 2) * inv_d, c(0, 1, 1, 2) * inv_d],
            [-c(1, 0, 2, 2) * inv_d, c(0, 0, 2, 2) * inv_d, -c(0, 0, 1, 2) * inv_d],
            [c(1, 0, 2, 1) * inv_d, -c(0, 0, 2, 1) * inv_d, c(0, 0, 1, 1) * inv_d],
        ]))
    }

    pub fn mul_vec(&self, v: &Vec3<T>) -> Vec3<T> {
        Vec3([self.row(0).dot(v), self.row(1).dot(v), self.row(2).dot(v)])
    }

    /// Rotation of `angle` radians about `axis` (Rodrigues).
    pub fn rotation(axis: Vec3<T>, angle: T) -> Self {
        let k = axis.normalized().unwrap_or(Vec3::new(T::zero(), T::zero(), T::one()));
        let (s, c) = angle.sin_cos();
        let t = T::one() - c;
        let [x, y, z] = k.0;
        Self([
            [t * x * x + c, t * x * y - s * z, t * x * z + s * y],
            [t * x * y + s * z, t * y * y + c, t * y * z - s * x],
            [t * x * z - s * y, t * y * z + s * x, t * z * z + c],
        ])
    }

    /// Max deviation of `RᵀR` from identity.
    pub fn orthonormality_error(&self) -> T {
        let p = self.transpose() * *self;
        let id = Self::identity();
        let mut e = T::zero();
        for i in 0..3 {
            for j in 0..3 {
                e = e.max((p.0[i][j] - id.0[i][j]).abs());
            }
        }
        e
    }

    pub fn cast<U: Real>(&self) -> Mat3<U> {
        Mat3(self.0.map(|r| r.map(|v| U::lit(v.as_f64()))))
    }
}

impl<T: Real> Mul for Mat3<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        let mut out = Self::zero();
        for i in 0..3 {
            for j in 0..3 {
                out.0[i][j] = (0..3).map(|k| self.0[i][k] * o.0[k][j]).sum();
            }
        }
        out
    }
}

impl<T> Index<(usize, usize)> for Mat3<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.0[i][j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat3<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.0[i][j]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_of_rotation_is_transpose() {
        let r = Mat3::<f64>::rotation(Vec3::new(0.3, -1.0, 0.2), 0.7);
        let inv = r.inverse().unwrap();
        let t = r.transpose();
        for i in 0..3 {
            for j in 0..3 {
                assert!((inv[(i, j)] - t[(i, j)]).abs() < 1e-12);
            }
        }
        assert!((r.det() - 1.0).abs() < 1e-12);
        assert!(r.orthonormality_error() < 1e-12);
    }

    #[test]
    fn singular_has_no_inverse() {
        let m = Mat3::<f32>::from_row_slice(&[1., 2., 3., 2., 4., 6., 0., 1., 0.]).unwrap();
        assert!(m.inverse().is_none());
    }

    #[test]
    fn cross_is_orthogonal() {
        let a = Vec3::new(1.0f64, 2.0, 3.0);
        let b = Vec3::new(-2.0, 0.5, 1.0);
        let c = a.cross(&b);
        assert!(c.dot(&a).abs() < 1e-12 && c.dot(&b).abs() < 1e-12);
    }
}
