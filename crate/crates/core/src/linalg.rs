//! Small fixed-size vector and symmetric-matrix types used per mesh node.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// A point or direction in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Returns the unit vector in the same direction, or `None` for a
    /// (numerically) zero vector.
    pub fn normalized(self) -> Option<Vec2> {
        let n = self.norm();
        if n > 1e-300 && n.is_finite() {
            Some(Vec2::new(self.x / n, self.y / n))
        } else {
            None
        }
    }

    /// Counter-clockwise rotation by a right angle: `(a, b) -> (-b, a)`.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }

    /// Componentwise reduction into `[0, 1)^2`.
    pub fn wrap_unit(self) -> Vec2 {
        Vec2::new(wrap_unit(self.x), wrap_unit(self.y))
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Reduces `t` into `[0, 1)`.
pub fn wrap_unit(t: f64) -> f64 {
    let r = t - t.floor();
    // `t.floor()` can round so that r == 1.0 for tiny negative t.
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Distance between two points of the unit torus.
pub fn torus_distance(a: Vec2, b: Vec2) -> f64 {
    let d = |s: f64| {
        let r = wrap_unit(s);
        r.min(1.0 - r)
    };
    d(a.x - b.x).hypot(d(a.y - b.y))
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl AddAssign for Vec2 {
    fn add_assign(&mut self, rhs: Vec2) {
        self.x += rhs.x;
        self.y += rhs.y;
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
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
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Mul<Vec2> for f64 {
    type Output = Vec2;
    fn mul(self, rhs: Vec2) -> Vec2 {
        rhs * self
    }
}

/// Symmetric 2×2 matrix `[[a11, a12], [a12, a22]]`.
///
/// The off-diagonal entry is stored once, so every value of this type is
/// exactly symmetric.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SymMat2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymMat2 {
    pub const IDENTITY: SymMat2 = SymMat2 { a11: 1.0, a12: 0.0, a22: 1.0 };
    pub const ZERO: SymMat2 = SymMat2 { a11: 0.0, a12: 0.0, a22: 0.0 };

    pub const fn new(a11: f64, a12: f64, a22: f64) -> Self {
        Self { a11, a12, a22 }
    }

    pub const fn diag(d1: f64, d2: f64) -> Self {
        Self::new(d1, 0.0, d2)
    }

    pub fn scaled_identity(s: f64) -> Self {
        Self::diag(s, s)
    }

    /// The rank-one matrix `v vᵀ`.
    pub fn outer(v: Vec2) -> Self {
        Self::new(v.x * v.x, v.x * v.y, v.y * v.y)
    }

    /// `l1·e1e1ᵀ + l2·e2e2ᵀ` for an orthonormal pair `(e1, e2)`.
    pub fn from_eigen(l1: f64, e1: Vec2, l2: f64, e2: Vec2) -> Self {
        Self::outer(e1) * l1 + Self::outer(e2) * l2
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn det(&self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a12
    }

    /// Exact positive-definiteness test for a symmetric 2×2 matrix.
    pub fn is_positive_definite(&self) -> bool {
        self.det() > 0.0 && self.trace() > 0.0
    }

    pub fn inverse(&self) -> Option<SymMat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(SymMat2::new(self.a22 / d, -self.a12 / d, self.a11 / d))
    }

    /// The (symmetric) product `A·A`.
    pub fn square(&self) -> SymMat2 {
        SymMat2::new(
            self.a11 * self.a11 + self.a12 * self.a12,
            self.a12 * (self.a11 + self.a22),
            self.a12 * self.a12 + self.a22 * self.a22,
        )
    }

    /// The congruence `Aᵀ M A` (= `A M A` for symmetric `A`), which is symmetric.
    pub fn congruence(&self, m: &SymMat2) -> SymMat2 {
        // B = M A
        let b11 = m.a11 * self.a11 + m.a12 * self.a12;
        let b12 = m.a11 * self.a12 + m.a12 * self.a22;
        let b21 = m.a12 * self.a11 + m.a22 * self.a12;
        let b22 = m.a12 * self.a12 + m.a22 * self.a22;
        // A B
        SymMat2::new(
            self.a11 * b11 + self.a12 * b21,
            self.a11 * b12 + self.a12 * b22,
            self.a12 * b12 + self.a22 * b22,
        )
    }

    pub fn apply(&self, v: Vec2) -> Vec2 {
        Vec2::new(self.a11 * v.x + self.a12 * v.y, self.a12 * v.x + self.a22 * v.y)
    }

    pub fn max_abs(&self) -> f64 {
        self.a11.abs().max(self.a12.abs()).max(self.a22.abs())
    }

    pub fn is_finite(&self) -> bool {
        self.a11.is_finite() && self.a12.is_finite() && self.a22.is_finite()
    }
}

impl Add for SymMat2 {
    type Output = SymMat2;
    fn add(self, rhs: SymMat2) -> SymMat2 {
        SymMat2::new(self.a11 + rhs.a11, self.a12 + rhs.a12, self.a22 + rhs.a22)
    }
}

impl Sub for SymMat2 {
    type Output = SymMat2;
    fn sub(self, rhs: SymMat2) -> SymMat2 {
        SymMat2::new(self.a11 - rhs.a11, self.a12 - rhs.a12, self.a22 - rhs.a22)
    }
}

impl Mul<f64> for SymMat2 {
    type Output = SymMat2;
    fn mul(self, rhs: f64) -> SymMat2 {
        SymMat2::new(self.a11 * rhs, self.a12 * rhs, self.a22 * rhs)
    }
}

/// General 2×2 matrix, row-major. Only used where a tabulated map has a
/// (numerically) non-symmetric Jacobian before symmetrization.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub m: [[f64; 2]; 2],
}

impl Mat2 {
    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Self { m: [[a11, a12], [a21, a22]] }
    }

    pub fn asymmetry(&self) -> f64 {
        (self.m[0][1] - self.m[1][0]).abs()
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn symmetric_part(&self) -> SymMat2 {
        SymMat2::new(self.m[0][0], 0.5 * (self.m[0][1] + self.m[1][0]), self.m[1][1])
    }
}

impl From<SymMat2> for Mat2 {
    fn from(s: SymMat2) -> Self {
        Mat2::new(s.a11, s.a12, s.a12, s.a22)
    }
}
