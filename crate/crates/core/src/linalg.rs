//! Fixed-size 2-vectors and 2×2 matrices.
//!
//! Everything in this crate lives in the plane, so a general linear algebra
//! dependency buys nothing over a handful of closed-form routines.

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Row-major 2×2 matrix `[[m00, m01], [m10, m11]]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Mat2 {
    pub m00: f64,
    pub m01: f64,
    pub m10: f64,
    pub m11: f64,
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2::new(1.0, 0.0, 0.0, 1.0);

    pub const fn new(m00: f64, m01: f64, m10: f64, m11: f64) -> Self {
        Self { m00, m01, m10, m11 }
    }

    pub const fn diag(a: f64, b: f64) -> Self {
        Self::new(a, 0.0, 0.0, b)
    }

    pub fn from_rows(rows: [[f64; 2]; 2]) -> Self {
        Self::new(rows[0][0], rows[0][1], rows[1][0], rows[1][1])
    }

    pub fn to_rows(self) -> [[f64; 2]; 2] {
        [[self.m00, self.m01], [self.m10, self.m11]]
    }

    pub fn transpose(self) -> Mat2 {
        Mat2::new(self.m00, self.m10, self.m01, self.m11)
    }

    pub fn trace(self) -> f64 {
        self.m00 + self.m11
    }

    pub fn det(self) -> f64 {
        self.m00 * self.m11 - self.m01 * self.m10
    }

    pub fn frobenius_norm(self) -> f64 {
        (self.m00 * self.m00 + self.m01 * self.m01 + self.m10 * self.m10 + self.m11 * self.m11)
            .sqrt()
    }

    pub fn max_abs(self) -> f64 {
        self.m00
            .abs()
            .max(self.m01.abs())
            .max(self.m10.abs())
            .max(self.m11.abs())
    }

    /// Returns `None` when the determinant is exactly zero.
    pub fn inverse(self) -> Option<Mat2> {
        let det = self.det();
        if det == 0.0 || !det.is_finite() {
            return None;
        }
        let inv = 1.0 / det;
        Some(Mat2::new(
            self.m11 * inv,
            -self.m01 * inv,
            -self.m10 * inv,
            self.m00 * inv,
        ))
    }

    /// Averages the off-diagonal entries.
    pub fn symmetrized(self) -> Mat2 {
        let off = 0.5 * (self.m01 + self.m10);
        Mat2::new(self.m00, off, off, self.m11)
    }

    pub fn is_finite(self) -> bool {
        self.m00.is_finite() && self.m01.is_finite() && self.m10.is_finite() && self.m11.is_finite()
    }

    pub fn is_symmetric(self, rel_tol: f64) -> bool {
        (self.m01 - self.m10).abs() <= rel_tol * self.max_abs().max(f64::MIN_POSITIVE)
    }

    pub fn mul_vec(self, v: Vec2) -> Vec2 {
        Vec2::new(
            self.m00 * v.x + self.m01 * v.y,
            self.m10 * v.x + self.m11 * v.y,
        )
    }

    /// `vᵀ M v`.
    pub fn quadratic_form(self, v: Vec2) -> f64 {
        v.dot(self.mul_vec(v))
    }

    /// Eigenvalues of a symmetric matrix, largest first.
    pub fn sym_eigenvalues(self) -> (f64, f64) {
        let half_tr = 0.5 * (self.m00 + self.m11);
        let half_diff = 0.5 * (self.m00 - self.m11);
        let off = 0.5 * (self.m01 + self.m10);
        let r = half_diff.hypot(off);
        (half_tr + r, half_tr - r)
    }

    /// Eigen-decomposition of a symmetric matrix.
    ///
    /// Returns `(λ_large, λ_small, angle)` where `angle` is the direction of
    /// the eigenvector of `λ_large` in `(-π/2, π/2]`. The angle is computed
    /// from `atan2(2b, a - c) / 2`, which is well conditioned everywhere except
    /// at repeated eigenvalues, where any direction is an eigenvector.
    pub fn sym_eigen(self) -> (f64, f64, f64) {
        let (l1, l2) = self.sym_eigenvalues();
        let off = 0.5 * (self.m01 + self.m10);
        let mut angle = 0.5 * (2.0 * off).atan2(self.m00 - self.m11);
        // atan2 returns (-π, π], so angle is in (-π/2, π/2].
        if angle <= -std::f64::consts::FRAC_PI_2 {
            angle += std::f64::consts::PI;
        }
        (l1, l2, angle)
    }
}

impl Add for Mat2 {
    type Output = Mat2;
    fn add(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m00 + o.m00,
            self.m01 + o.m01,
            self.m10 + o.m10,
            self.m11 + o.m11,
        )
    }
}

impl Sub for Mat2 {
    type Output = Mat2;
    fn sub(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m00 - o.m00,
            self.m01 - o.m01,
            self.m10 - o.m10,
            self.m11 - o.m11,
        )
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        Mat2::new(
            self.m00 * o.m00 + self.m01 * o.m10,
            self.m00 * o.m01 + self.m01 * o.m11,
            self.m10 * o.m00 + self.m11 * o.m10,
            self.m10 * o.m01 + self.m11 * o.m11,
        )
    }
}

impl Mul<f64> for Mat2 {
    type Output = Mat2;
    fn mul(self, s: f64) -> Mat2 {
        Mat2::new(self.m00 * s, self.m01 * s, self.m10 * s, self.m11 * s)
    }
}
