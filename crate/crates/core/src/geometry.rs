//! Plane vectors and orthogonal transformations.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

/// A spatial frequency in cycles per image width.
///
/// `x` pairs with the column index and `y` with the row index, so integer
/// frequencies coincide with FFT bins.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Frequency<T> {
    pub x: T,
    pub y: T,
}

impl<T: Real> Frequency<T> {
    pub fn new(x: T, y: T) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Self) -> T {
        (self - other).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Polar angle in radians.
    pub fn angle(self) -> T {
        self.y.atan2(self.x)
    }

    pub fn scale(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s)
    }

    pub fn cast<U: Real>(self) -> Frequency<U> {
        Frequency::new(U::of(self.x.as_f64()), U::of(self.y.as_f64()))
    }

    /// Largest absolute component, compared against the Nyquist bound `n/2`.
    pub fn max_abs(self) -> T {
        self.x.abs().max(self.y.abs())
    }
}

impl<T: Real> Add for Frequency<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y)
    }
}

impl<T: Real> Sub for Frequency<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y)
    }
}

impl<T: Real> Neg for Frequency<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y)
    }
}

impl<T: Real> fmt::Display for Frequency<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.x, self.y)
    }
}

/// A real 2×2 matrix, used for the orthogonal candidates of a point group.
///
/// Stored in `f64` regardless of the image scalar; the matrix describes
/// geometry, not measured data.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat2 {
    pub rows: [[f64; 2]; 2],
}

impl Mat2 {
    pub const IDENTITY: Mat2 = Mat2 {
        rows: [[1.0, 0.0], [0.0, 1.0]],
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            rows: [[a, b], [c, d]],
        }
    }

    /// Counter-clockwise rotation in the (x, y) frame. With rows running
    /// downwards on screen this appears clockwise in the rendered image.
    pub fn rotation(angle: f64) -> Self {
        let (s, c) = angle.sin_cos();
        Self::new(c, -s, s, c)
    }

    /// Rotation by `2π / order`.
    pub fn rotation_of_order(order: u32) -> Self {
        Self::rotation(std::f64::consts::TAU / order as f64)
    }

    /// Reflection across the line through the origin at `axis_angle`.
    /// `axis_angle = 0` is the horizontal mirror `(x, y) ↦ (x, −y)`.
    pub fn mirror(axis_angle: f64) -> Self {
        let (s, c) = (2.0 * axis_angle).sin_cos();
        Self::new(c, s, s, -c)
    }

    pub fn det(&self) -> f64 {
        self.rows[0][0] * self.rows[1][1] - self.rows[0][1] * self.rows[1][0]
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.rows[0][0], self.rows[1][0], self.rows[0][1], self.rows[1][1])
    }

    pub fn is_orthogonal(&self, tol: f64) -> bool {
        let p = self.transpose() * *self;
        (p.rows[0][0] - 1.0).abs() <= tol
            && (p.rows[1][1] - 1.0).abs() <= tol
            && p.rows[0][1].abs() <= tol
            && p.rows[1][0].abs() <= tol
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let mut m: f64 = 0.0;
        for r in 0..2 {
            for c in 0..2 {
                m = m.max((self.rows[r][c] - other.rows[r][c]).abs());
            }
        }
        m
    }

    pub fn pow(&self, k: u32) -> Self {
        (0..k).fold(Self::IDENTITY, |acc, _| acc * *self)
    }

    /// Smallest `k ≤ limit` with `Q^k = I`, if any.
    pub fn order(&self, limit: u32, tol: f64) -> Option<u32> {
        let mut acc = *self;
        for k in 1..=limit {
            if acc.max_abs_diff(&Self::IDENTITY) <= tol {
                return Some(k);
            }
            acc = acc * *self;
        }
        None
    }

    pub fn apply<T: Real>(&self, k: Frequency<T>) -> Frequency<T> {
        let r = &self.rows;
        Frequency::new(
            T::of(r[0][0]) * k.x + T::of(r[0][1]) * k.y,
            T::of(r[1][0]) * k.x + T::of(r[1][1]) * k.y,
        )
    }
}

impl Mul for Mat2 {
    type Output = Mat2;
    fn mul(self, o: Mat2) -> Mat2 {
        let a = &self.rows;
        let b = &o.rows;
        Mat2::new(
            a[0][0] * b[0][0] + a[0][1] * b[1][0],
            a[0][0] * b[0][1] + a[0][1] * b[1][1],
            a[1][0] * b[0][0] + a[1][1] * b[1][0],
            a[1][0] * b[0][1] + a[1][1] * b[1][1],
        )
    }
}

impl fmt::Display for Mat2 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = &self.rows;
        write!(
            f,
            "[[{:.6}, {:.6}], [{:.6}, {:.6}]]",
            r[0][0], r[0][1], r[1][0], r[1][1]
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rotation_orders() {
        for n in [2u32, 4, 5, 8, 10] {
            assert_eq!(Mat2::rotation_of_order(n).order(64, 1e-9), Some(n));
        }
        assert_eq!(Mat2::mirror(0.3).order(64, 1e-9), Some(2));
    }

    #[test]
    fn horizontal_mirror_flips_y() {
        let h = Mat2::mirror(0.0);
        let k = h.apply(Frequency::new(20.0f64, 10.0));
        assert!((k.x - 20.0).abs() < 1e-15 && (k.y + 10.0).abs() < 1e-15);
        assert!(h.is_orthogonal(1e-12));
        assert!((h.det() + 1.0).abs() < 1e-12);
    }
}
